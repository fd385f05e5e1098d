#ifndef LDKGP_DATASET_HPP
#define LDKGP_DATASET_HPP

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ldkgp/types.hpp"

namespace ldkgp {

enum class ColumnKind { Continuous, Categorical };

/// Declared kinds for the covariate columns of a CSV file. Columns not
/// listed default to continuous.
struct CsvSchema {
  std::map<std::string, ColumnKind> kinds;
  ColumnKind kind_of(const std::string& name) const {
    auto it = kinds.find(name);
    return it == kinds.end() ? ColumnKind::Continuous : it->second;
  }
};

/// Repeated observations grouped by individual. Individual ids are dense
/// 1..I in first-appearance order; the original id tokens are retained so
/// models can be applied to new files with matching identities.
struct LongitudinalDataset {
  Matrix covariates;                    // N x P
  Vector outcome;                       // N
  Vector time;                          // N
  std::vector<int> individual;          // N, values in 1..I
  std::vector<std::string> id_labels;   // I, original tokens
  std::vector<std::string> column_names;            // P
  std::vector<ColumnKind> column_kinds;             // P
  std::vector<std::map<std::string, int>> category_codes;  // per column, empty if continuous

  Index n_rows() const { return covariates.rows(); }
  Index n_cols() const { return covariates.cols(); }
  int n_individuals() const { return static_cast<int>(id_labels.size()); }

  std::vector<std::vector<Index>> rows_by_individual() const;
  LongitudinalDataset subset(const std::vector<Index>& rows) const;
  void validate() const;
};

LongitudinalDataset load_csv(const std::string& path, const CsvSchema& schema = {});
void save_csv(const LongitudinalDataset& data, const std::string& path,
              const std::string& comment = {});

/// Column statistics fit on the training split and reapplied verbatim to
/// validation/test. Continuous columns are standardized, categorical
/// columns one-hot expanded over the train vocabulary, and the outcome is
/// centered by the train mean.
struct PreprocessSpec {
  struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    double mean = 0.0;
    double std = 1.0;
    bool dropped = false;                 // zero-variance continuous column
    std::vector<int> levels;              // categorical codes seen in train
    std::vector<std::string> level_names;
  };
  std::vector<Column> columns;
  double outcome_mean = 0.0;

  Index output_dim() const;
};

PreprocessSpec fit_preprocess(const LongitudinalDataset& train);
LongitudinalDataset apply_preprocess(const PreprocessSpec& spec,
                                     const LongitudinalDataset& data);

struct SplitResult {
  std::vector<Index> train, valid, test;
};

/// Observation-level split stratified by individual: each individual's rows
/// are distributed across the three splits in proportion where possible;
/// individuals with fewer than three rows go entirely to train so every
/// evaluated individual has a learned embedding.
SplitResult split(const LongitudinalDataset& data, std::array<double, 3> fractions,
                  std::mt19937_64& rng);

}  // namespace ldkgp

#endif
