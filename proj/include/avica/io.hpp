#pragma once

#include <optional>
#include <string>

#include "avica/optim_mle.hpp"
#include "avica/synth.hpp"

namespace avica {

// Matrix files: text rows of comma-separated %.17g doubles (one row per
// component), or raw little-endian float64, row-major, dimensions carried by
// the manifest.
void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);
void write_matrix_bin(const std::string& path, const Matrix& m);
Matrix read_matrix_bin(const std::string& path, Eigen::Index rows, Eigen::Index cols);

// A dataset directory: manifest.json plus per-view matrices and optional
// ground truth, with seed/config provenance.
struct DatasetBundle {
  MultiViewDataset data;
  std::optional<GroundTruth> truth;
  SynthConfig config;   // generator echo from the manifest
  std::string format;   // "csv" or "bin"
};

void save_bundle(const std::string& dir, const MultiViewDataset& data, const GroundTruth* truth,
                 const SynthConfig& config, const std::string& format);
DatasetBundle load_bundle(const std::string& dir);

// A fit-result directory: result.json plus parameter/source matrices and the
// per-sweep trace table.
struct FitArtifacts {
  std::string algorithm;
  ModelParams params;
  Matrix sources;
  ConvergenceTrace trace;
  std::string terminated;  // "converged" | "max_sweeps" | "none"
};

void save_fit(const std::string& dir, const FitArtifacts& artifacts, bool include_timing);
FitArtifacts load_fit(const std::string& dir);

// Trace table: "# avica-trace v1" header, then
// sweep,gradW_inf,gradEta_inf,gradSigma_inf,nll,seconds. Without timing the
// seconds column is written as zero so reruns are byte-identical.
void write_trace_csv(const std::string& path, const ConvergenceTrace& trace, bool include_timing);

std::string format_double(double v);  // %.17g

}  // namespace avica
