#include "avica/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace avica {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.c_str();
    char* end = nullptr;
    for (;;) {
      const double v = std::strtod(p, &end);
      if (end == p) throw std::runtime_error("bad number in " + path);
      row.push_back(v);
      p = end;
      while (*p == ' ') ++p;
      if (*p == ',') {
        ++p;
      } else {
        break;
      }
    }
    if (!rows.empty() && row.size() != rows[0].size())
      throw std::runtime_error("ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty matrix file: " + path);
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

void write_matrix_bin(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Matrix read_matrix_bin(const std::string& path, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      if (!in) throw std::runtime_error("truncated matrix file: " + path);
      m(r, c) = v;
    }
  return m;
}

namespace {

void write_matrix(const std::string& path, const Matrix& m, const std::string& format) {
  if (format == "bin")
    write_matrix_bin(path, m);
  else
    write_matrix_csv(path, m);
}

Matrix read_matrix(const std::string& path, const std::string& format, Eigen::Index rows,
                   Eigen::Index cols) {
  if (format == "bin") return read_matrix_bin(path, rows, cols);
  Matrix m = read_matrix_csv(path);
  if (m.rows() != rows || m.cols() != cols)
    throw std::runtime_error("manifest shape mismatch for " + path);
  return m;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j;
  in >> j;
  return j;
}

std::string ext_for(const std::string& format) { return format == "bin" ? ".bin" : ".csv"; }

}  // namespace

void save_bundle(const std::string& dir, const MultiViewDataset& data, const GroundTruth* truth,
                 const SynthConfig& config, const std::string& format) {
  if (format != "csv" && format != "bin")
    throw std::invalid_argument("save_bundle: format must be csv or bin");
  fs::create_directories(dir);
  const std::string ext = ext_for(format);

  json manifest;
  manifest["schema"] = "avica-bundle-v1";
  manifest["m"] = data.n_views();
  manifest["k"] = data.n_components();
  manifest["n"] = data.n_samples();
  manifest["format"] = format;
  manifest["seed"] = config.seed;
  manifest["generator"] = {{"m", config.m},
                           {"k", config.k},
                           {"n", config.n},
                           {"mean_log_sigma", config.mean_log_sigma},
                           {"std_log_sigma", config.std_log_sigma},
                           {"dirichlet_alpha", config.dirichlet_alpha},
                           {"seed", config.seed}};

  std::vector<std::string> view_files;
  for (int i = 0; i < data.n_views(); ++i) {
    const std::string name = "view_" + std::to_string(i) + ext;
    write_matrix((fs::path(dir) / name).string(), data.views[i], format);
    view_files.push_back(name);
  }
  manifest["views"] = view_files;

  if (truth) {
    json t;
    t["sources"] = std::string("truth_sources") + ext;
    write_matrix((fs::path(dir) / ("truth_sources" + ext)).string(), truth->sources, format);
    std::vector<std::string> mixing_files;
    for (std::size_t i = 0; i < truth->mixing.size(); ++i) {
      const std::string name = "truth_mixing_" + std::to_string(i) + ext;
      write_matrix((fs::path(dir) / name).string(), truth->mixing[i], format);
      mixing_files.push_back(name);
    }
    t["mixing"] = mixing_files;
    t["precision"] = std::string("truth_precision") + ext;
    write_matrix((fs::path(dir) / ("truth_precision" + ext)).string(), truth->precision, format);
    t["noise_level"] = std::string("truth_noise_level") + ext;
    write_matrix((fs::path(dir) / ("truth_noise_level" + ext)).string(),
                 Matrix(truth->noise_level.transpose()), format);
    manifest["ground_truth"] = t;
  }

  write_json((fs::path(dir) / "manifest.json").string(), manifest);
}

DatasetBundle load_bundle(const std::string& dir) {
  const json manifest = read_json((fs::path(dir) / "manifest.json").string());
  if (manifest.at("schema") != "avica-bundle-v1")
    throw std::runtime_error("unknown bundle schema in " + dir);

  DatasetBundle bundle;
  bundle.format = manifest.at("format");
  const int m = manifest.at("m");
  const int k = manifest.at("k");
  const int n = manifest.at("n");
  const auto& views = manifest.at("views");
  if (static_cast<int>(views.size()) != m)
    throw std::runtime_error("manifest view count mismatch in " + dir);
  for (const auto& name : views)
    bundle.data.views.push_back(
        read_matrix((fs::path(dir) / name.get<std::string>()).string(), bundle.format, k, n));
  bundle.data.validate();

  if (manifest.contains("generator")) {
    const auto& g = manifest.at("generator");
    bundle.config.m = g.value("m", m);
    bundle.config.k = g.value("k", k);
    bundle.config.n = g.value("n", n);
    bundle.config.mean_log_sigma = g.value("mean_log_sigma", 0.0);
    bundle.config.std_log_sigma = g.value("std_log_sigma", 0.0);
    bundle.config.dirichlet_alpha = g.value("dirichlet_alpha", 1.0);
    bundle.config.seed = g.value("seed", static_cast<std::uint64_t>(0));
  }

  if (manifest.contains("ground_truth")) {
    const auto& t = manifest.at("ground_truth");
    GroundTruth truth;
    truth.sources = read_matrix((fs::path(dir) / t.at("sources").get<std::string>()).string(),
                                bundle.format, k, n);
    for (const auto& name : t.at("mixing"))
      truth.mixing.push_back(
          read_matrix((fs::path(dir) / name.get<std::string>()).string(), bundle.format, k, k));
    if (static_cast<int>(truth.mixing.size()) != m)
      throw std::runtime_error("manifest mixing count mismatch in " + dir);
    truth.precision = read_matrix(
        (fs::path(dir) / t.at("precision").get<std::string>()).string(), bundle.format, m, k);
    truth.noise_level =
        read_matrix((fs::path(dir) / t.at("noise_level").get<std::string>()).string(),
                    bundle.format, 1, k)
            .transpose();
    bundle.truth = std::move(truth);
  }
  return bundle;
}

void write_trace_csv(const std::string& path, const ConvergenceTrace& trace,
                     bool include_timing) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "# avica-trace v1\n";
  out << "sweep,gradW_inf,gradEta_inf,gradSigma_inf,nll,seconds\n";
  for (std::size_t s = 0; s < trace.sweeps.size(); ++s) {
    const auto& rec = trace.sweeps[s];
    out << s << ',' << format_double(rec.unmixing_grad_inf) << ','
        << format_double(rec.precision_grad_inf) << ',' << format_double(rec.noise_grad_inf)
        << ',' << format_double(rec.nll) << ','
        << format_double(include_timing ? rec.seconds : 0.0) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {
ConvergenceTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  ConvergenceTrace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("sweep,", 0) == 0) continue;
    SweepRecord rec{};
    int sweep = 0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &sweep, &rec.unmixing_grad_inf,
                    &rec.precision_grad_inf, &rec.noise_grad_inf, &rec.nll, &rec.seconds) != 6)
      throw std::runtime_error("bad trace row in " + path);
    trace.sweeps.push_back(rec);
  }
  return trace;
}
}  // namespace

void save_fit(const std::string& dir, const FitArtifacts& artifacts, bool include_timing) {
  fs::create_directories(dir);
  json result;
  result["schema"] = "avica-result-v1";
  result["algorithm"] = artifacts.algorithm;
  result["m"] = artifacts.params.n_views();
  result["k"] = artifacts.params.n_components();
  result["n"] = static_cast<int>(artifacts.sources.cols());
  result["terminated"] = artifacts.terminated;
  result["precision_floor"] = artifacts.params.precision_floor;

  std::vector<std::string> unmixing_files;
  for (int i = 0; i < artifacts.params.n_views(); ++i) {
    const std::string name = "unmixing_" + std::to_string(i) + ".csv";
    write_matrix_csv((fs::path(dir) / name).string(), artifacts.params.unmixing[i]);
    unmixing_files.push_back(name);
  }
  result["unmixing"] = unmixing_files;
  result["precision"] = "precision.csv";
  write_matrix_csv((fs::path(dir) / "precision.csv").string(), artifacts.params.precision);
  result["noise_level"] = "noise_level.csv";
  write_matrix_csv((fs::path(dir) / "noise_level.csv").string(),
                   Matrix(artifacts.params.noise_level.transpose()));
  result["sources"] = "sources.csv";
  write_matrix_csv((fs::path(dir) / "sources.csv").string(), artifacts.sources);
  result["trace"] = "trace.csv";
  write_trace_csv((fs::path(dir) / "trace.csv").string(), artifacts.trace, include_timing);

  write_json((fs::path(dir) / "result.json").string(), result);
}

FitArtifacts load_fit(const std::string& dir) {
  const json result = read_json((fs::path(dir) / "result.json").string());
  if (result.at("schema") != "avica-result-v1")
    throw std::runtime_error("unknown result schema in " + dir);

  FitArtifacts a;
  a.algorithm = result.at("algorithm");
  a.terminated = result.at("terminated");
  const int m = result.at("m");
  const int k = result.at("k");
  const int n = result.at("n");
  for (const auto& name : result.at("unmixing")) {
    Matrix w = read_matrix_csv((fs::path(dir) / name.get<std::string>()).string());
    if (w.rows() != k || w.cols() != k) throw std::runtime_error("bad unmixing shape in " + dir);
    a.params.unmixing.push_back(std::move(w));
  }
  if (a.params.n_views() != m) throw std::runtime_error("unmixing count mismatch in " + dir);
  a.params.precision =
      read_matrix_csv((fs::path(dir) / result.at("precision").get<std::string>()).string());
  a.params.noise_level =
      read_matrix_csv((fs::path(dir) / result.at("noise_level").get<std::string>()).string())
          .transpose();
  a.params.precision_floor = result.value("precision_floor", 0.0);
  a.sources = read_matrix_csv((fs::path(dir) / result.at("sources").get<std::string>()).string());
  if (a.sources.rows() != k || a.sources.cols() != n)
    throw std::runtime_error("bad sources shape in " + dir);
  a.trace = read_trace_csv((fs::path(dir) / result.at("trace").get<std::string>()).string());
  return a;
}

}  // namespace avica
