#include "ldkgp/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ldkgp {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, Index row, const std::string& col) {
  const std::string t = trim(cell);
  try {
    std::size_t pos = 0;
    double v = std::stod(t, &pos);
    if (pos != t.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("row " + std::to_string(row) + ", column '" + col +
                     "': expected a number, got '" + cell + "'");
  }
}

}  // namespace

std::vector<std::vector<Index>> LongitudinalDataset::rows_by_individual() const {
  std::vector<std::vector<Index>> out(n_individuals());
  for (Index r = 0; r < n_rows(); ++r) out[individual[r] - 1].push_back(r);
  return out;
}

LongitudinalDataset LongitudinalDataset::subset(const std::vector<Index>& rows) const {
  LongitudinalDataset out;
  out.covariates.resize(static_cast<Index>(rows.size()), covariates.cols());
  out.outcome.resize(static_cast<Index>(rows.size()));
  out.time.resize(static_cast<Index>(rows.size()));
  out.individual.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.covariates.row(static_cast<Index>(i)) = covariates.row(rows[i]);
    out.outcome(static_cast<Index>(i)) = outcome(rows[i]);
    out.time(static_cast<Index>(i)) = time(rows[i]);
    out.individual.push_back(individual[rows[i]]);
  }
  out.id_labels = id_labels;
  out.column_names = column_names;
  out.column_kinds = column_kinds;
  out.category_codes = category_codes;
  return out;
}

void LongitudinalDataset::validate() const {
  if (outcome.size() != n_rows() || time.size() != n_rows() ||
      static_cast<Index>(individual.size()) != n_rows())
    throw ShapeMismatch("dataset: row counts disagree");
  for (Index r = 0; r < n_rows(); ++r) {
    if (individual[r] < 1 || individual[r] > n_individuals())
      throw UnknownEntity("dataset: individual id out of range at row " + std::to_string(r));
  }
  if (!covariates.allFinite() || !outcome.allFinite())
    throw NonFiniteValue("dataset: non-finite values");
}

LongitudinalDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  // header (comment lines starting with '#' are skipped)
  do {
    if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file");
  } while (!line.empty() && line[0] == '#');
  auto header = split_line(line);
  for (auto& h : header) h = trim(h);
  auto find_col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw MissingColumn("'" + path + "': missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_id = find_col("individual_id");
  const std::size_t c_time = find_col("time");
  const std::size_t c_out = find_col("outcome");

  std::vector<std::size_t> cov_cols;
  LongitudinalDataset data;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == c_id || c == c_time || c == c_out) continue;
    cov_cols.push_back(c);
    data.column_names.push_back(header[c]);
    data.column_kinds.push_back(schema.kind_of(header[c]));
  }
  data.category_codes.resize(cov_cols.size());

  std::vector<std::array<double, 2>> time_out;
  std::vector<std::vector<double>> x_rows;
  std::map<std::string, int> id_map;
  Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++row;
    auto cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    const std::string id_tok = trim(cells[c_id]);
    auto [it, inserted] = id_map.try_emplace(id_tok, static_cast<int>(id_map.size()) + 1);
    if (inserted) data.id_labels.push_back(id_tok);
    data.individual.push_back(it->second);
    time_out.push_back({parse_number(cells[c_time], row, "time"),
                        parse_number(cells[c_out], row, "outcome")});
    std::vector<double> x(cov_cols.size());
    for (std::size_t j = 0; j < cov_cols.size(); ++j) {
      const std::string& cell = cells[cov_cols[j]];
      if (data.column_kinds[j] == ColumnKind::Continuous) {
        x[j] = parse_number(cell, row, data.column_names[j]);
      } else {
        auto [cit, cinserted] = data.category_codes[j].try_emplace(
            trim(cell), static_cast<int>(data.category_codes[j].size()));
        x[j] = static_cast<double>(cit->second);
        (void)cinserted;
      }
    }
    x_rows.push_back(std::move(x));
  }
  const Index n = static_cast<Index>(x_rows.size());
  data.covariates.resize(n, static_cast<Index>(cov_cols.size()));
  data.outcome.resize(n);
  data.time.resize(n);
  for (Index r = 0; r < n; ++r) {
    data.time(r) = time_out[r][0];
    data.outcome(r) = time_out[r][1];
    for (Index c = 0; c < data.covariates.cols(); ++c)
      data.covariates(r, c) = x_rows[r][static_cast<std::size_t>(c)];
  }
  data.validate();
  return data;
}

void save_csv(const LongitudinalDataset& data, const std::string& path,
              const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "individual_id,time,outcome";
  for (const auto& c : data.column_names) out << "," << c;
  out << "\n";
  for (Index r = 0; r < data.n_rows(); ++r) {
    out << data.id_labels[data.individual[r] - 1] << "," << data.time(r) << ","
        << data.outcome(r);
    for (Index c = 0; c < data.n_cols(); ++c) out << "," << data.covariates(r, c);
    out << "\n";
  }
}

Index PreprocessSpec::output_dim() const {
  Index d = 0;
  for (const auto& c : columns) {
    if (c.dropped) continue;
    d += c.kind == ColumnKind::Continuous ? 1 : static_cast<Index>(c.levels.size());
  }
  return d;
}

PreprocessSpec fit_preprocess(const LongitudinalDataset& train) {
  PreprocessSpec spec;
  spec.outcome_mean = train.n_rows() > 0 ? train.outcome.mean() : 0.0;
  for (Index c = 0; c < train.n_cols(); ++c) {
    PreprocessSpec::Column col;
    col.name = train.column_names[c];
    col.kind = train.column_kinds[c];
    if (col.kind == ColumnKind::Continuous) {
      col.mean = train.covariates.col(c).mean();
      const double var =
          (train.covariates.col(c).array() - col.mean).square().sum() / train.n_rows();
      col.std = std::sqrt(var);
      if (col.std <= 0.0) col.dropped = true;
    } else {
      std::vector<char> seen(train.category_codes[c].size(), 0);
      for (Index r = 0; r < train.n_rows(); ++r) {
        const int code = static_cast<int>(train.covariates(r, c));
        if (code >= 0 && code < static_cast<int>(seen.size())) seen[code] = 1;
      }
      std::vector<std::string> names(train.category_codes[c].size());
      for (const auto& [tok, code] : train.category_codes[c]) names[code] = tok;
      for (std::size_t code = 0; code < seen.size(); ++code) {
        if (!seen[code]) continue;
        col.levels.push_back(static_cast<int>(code));
        col.level_names.push_back(names[code]);
      }
    }
    spec.columns.push_back(std::move(col));
  }
  return spec;
}

LongitudinalDataset apply_preprocess(const PreprocessSpec& spec,
                                     const LongitudinalDataset& data) {
  if (static_cast<Index>(spec.columns.size()) != data.n_cols())
    throw ShapeMismatch("apply_preprocess: column count mismatch");
  LongitudinalDataset out;
  out.individual = data.individual;
  out.id_labels = data.id_labels;
  out.time = data.time;
  out.outcome = data.outcome.array() - spec.outcome_mean;
  out.covariates.resize(data.n_rows(), spec.output_dim());
  Index d = 0;
  for (std::size_t c = 0; c < spec.columns.size(); ++c) {
    const auto& col = spec.columns[c];
    if (col.dropped) continue;
    if (col.kind == ColumnKind::Continuous) {
      out.covariates.col(d) =
          (data.covariates.col(static_cast<Index>(c)).array() - col.mean) / col.std;
      out.column_names.push_back(col.name);
      out.column_kinds.push_back(ColumnKind::Continuous);
      ++d;
    } else {
      // levels matched by token so a spec fit on one file applies to
      // another whose category codes were assigned independently
      const auto& codes = data.category_codes[c];
      for (std::size_t l = 0; l < col.levels.size(); ++l) {
        auto it = codes.find(col.level_names[l]);
        if (it == codes.end()) {
          out.covariates.col(d).setZero();
        } else {
          out.covariates.col(d) =
              (data.covariates.col(static_cast<Index>(c)).array() ==
               static_cast<double>(it->second))
                  .cast<double>();
        }
        out.column_names.push_back(col.name + "=" + col.level_names[l]);
        out.column_kinds.push_back(ColumnKind::Continuous);
        ++d;
      }
    }
  }
  out.category_codes.assign(out.column_names.size(), {});
  return out;
}

SplitResult split(const LongitudinalDataset& data, std::array<double, 3> fractions,
                  std::mt19937_64& rng) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 || fractions[0] <= 0 || fractions[1] < 0 || fractions[2] < 0)
    throw InvalidFractions("split fractions must be nonnegative and sum to 1");
  SplitResult out;
  auto groups = data.rows_by_individual();
  for (auto& rows : groups) {
    const Index n = static_cast<Index>(rows.size());
    if (n < 3) {
      out.train.insert(out.train.end(), rows.begin(), rows.end());
      continue;
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    Index n_tr = std::max<Index>(1, static_cast<Index>(std::lround(fractions[0] * n)));
    Index n_va = static_cast<Index>(std::lround(fractions[1] * n));
    n_tr = std::min(n_tr, n);
    n_va = std::min(n_va, n - n_tr);
    out.train.insert(out.train.end(), rows.begin(), rows.begin() + n_tr);
    out.valid.insert(out.valid.end(), rows.begin() + n_tr, rows.begin() + n_tr + n_va);
    out.test.insert(out.test.end(), rows.begin() + n_tr + n_va, rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.valid.begin(), out.valid.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace ldkgp
