#pragma once

// Complex-vector forecast metrics, report formatting and grid search.

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace csipred {

using ComplexVector = std::vector<std::complex<double>>;

// Mean over windows; windows whose norm makes the ratio undefined are skipped
// and counted in `excluded`.
struct MetricValue {
  double value = 0.0;
  std::size_t windows = 0;
  std::size_t excluded = 0;
};

MetricValue nmse(std::span<const ComplexVector> predicted, std::span<const ComplexVector> truth);
MetricValue cosine_similarity(std::span<const ComplexVector> predicted,
                              std::span<const ComplexVector> truth);

// Window-count weighted mean of per-set metrics.
MetricValue pooled(std::span<const MetricValue> parts);

double to_db(double linear);

struct MetricReport {
  std::string model;
  std::string track;
  std::uint64_t seed = 0;
  std::string scope;  // "antenna <id>" or "all"
  double nmse = 0.0;
  double nmse_db = 0.0;
  double cosine = 0.0;
  std::size_t windows = 0;
  std::size_t excluded = 0;
  std::string config_digest;
};

MetricReport make_report(std::string model, std::string track, std::uint64_t seed,
                         std::string scope, const MetricValue& nmse_value,
                         const MetricValue& cosine_value, std::string config_digest);

// Columns: model,track,seed,scope,nmse,nmse_db,cosine,windows,excluded,config_digest
std::string reports_to_csv(std::span<const MetricReport> reports);
std::string reports_to_json(std::span<const MetricReport> reports);

double median(std::vector<double> values);

using GridCell = std::map<std::string, std::string>;

struct ParamGrid {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;

  void validate() const;
  // Cartesian product, sorted by the cell's key/value text.
  std::vector<GridCell> cells() const;
};

// One axis per line: `key = v1, v2, ...`; '#' starts a comment.
ParamGrid parse_grid(const std::string& text);

struct TrialOutcome {
  double validation_nmse = 0.0;
  std::size_t parameter_count = 0;
};

struct Trial {
  GridCell cell;
  bool ok = false;
  TrialOutcome outcome;
  std::string error;
};

struct GridResult {
  GridCell best;
  TrialOutcome best_outcome;
  std::vector<Trial> trials;  // in cells() order
};

using TrialFn = std::function<TrialOutcome(const GridCell&)>;

// Minimum validation NMSE; ties go to fewer parameters, then the smaller cell.
// A throwing trial is recorded as failed. Throws std::runtime_error when every
// cell fails.
GridResult grid_search(const ParamGrid& grid, const TrialFn& run);

// Columns: one per axis key, then status,validation_nmse,parameter_count,error
std::string trials_to_csv(const GridResult& result);

}  // namespace csipred
