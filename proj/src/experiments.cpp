#include "avica/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "avica/baselines.hpp"
#include "avica/io.hpp"
#include "avica/metrics.hpp"
#include "avica/synth.hpp"

namespace avica {

namespace fs = std::filesystem;

namespace {

// Independent tasks over (condition, seed); each writes only its own slot.
void run_tasks(std::vector<std::function<void()>>& tasks, int threads) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= tasks.size()) return;
      try {
        tasks[idx]();
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

OptimizerConfig with_seed(OptimizerConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

double final_grad_inf(const ConvergenceTrace& trace) {
  const auto& last = trace.sweeps.back();
  return std::max({last.unmixing_grad_inf, last.precision_grad_inf, last.noise_grad_inf});
}

MultiViewDataset take_columns(const MultiViewDataset& data, Eigen::Index start,
                              Eigen::Index count) {
  MultiViewDataset out;
  for (const auto& v : data.views) out.views.push_back(v.middleCols(start, count));
  return out;
}

// Shared-source estimate from a subset of views: per-source weighted average
// of unmixed test data, weights renormalized over the present views.
Matrix weighted_sources_excluding(const std::vector<Matrix>& unmixing, const Matrix& precision,
                                  const MultiViewDataset& data, int excluded) {
  const int m = static_cast<int>(unmixing.size());
  const int k = static_cast<int>(unmixing[0].rows());
  Matrix shat = Matrix::Zero(k, data.n_samples());
  Vector total = Vector::Zero(k);
  for (int z = 0; z < m; ++z) {
    if (z == excluded) continue;
    const Matrix y = unmixing[z] * data.views[z];
    shat.array() += y.array().colwise() * precision.row(z).transpose().array();
    total += precision.row(z).transpose();
  }
  shat.array().colwise() /= total.array();
  return shat;
}

double transfer_r2(const std::vector<Matrix>& unmixing, const Matrix& precision,
                   const MultiViewDataset& test) {
  const int m = test.n_views();
  double total = 0.0;
  int count = 0;
  for (int i = 0; i < m; ++i) {
    const Matrix shat = weighted_sources_excluding(unmixing, precision, test, i);
    const Matrix reconstructed = unmixing[i].partialPivLu().solve(shat);
    for (int r = 0; r < test.n_components(); ++r) {
      total += r2_score(test.views[i].row(r).transpose(), reconstructed.row(r).transpose());
      ++count;
    }
  }
  return total / count;
}

struct MethodSources {
  std::string name;
  Matrix sources;
};

}  // namespace

FitResult run_avica_mle(const MultiViewDataset& data, const OptimizerConfig& config) {
  const GroupIcaResult concat = concat_ica(data, data.n_components(), config);
  return fit_mle(data, config, params_from_unmixing(concat.unmixing, config.mu_sq));
}

FitResult run_avica_em(const MultiViewDataset& data, const EmConfig& config) {
  OptimizerConfig init_cfg;
  init_cfg.seed = config.seed;
  init_cfg.ls_max_halvings = config.ls_max_halvings;
  init_cfg.hess_floor = config.hess_floor;
  const GroupIcaResult concat = concat_ica(data, data.n_components(), init_cfg);
  return fit_em(data, config, params_from_unmixing(concat.unmixing, config.mu_sq));
}

FitResult run_mvica(const MultiViewDataset& data, const OptimizerConfig& config) {
  const GroupIcaResult concat = concat_ica(data, data.n_components(), config);
  return mvica_fit(data, config, params_from_unmixing(concat.unmixing, 0.0));
}

ExperimentReport run_experiment(const std::string& name, const ExperimentOptions& options) {
  ExperimentReport report;
  report.name = name;
  report.config_echo = {{"seeds", std::to_string(options.seeds)},
                        {"m", std::to_string(options.m)},
                        {"k", std::to_string(options.k)},
                        {"n", std::to_string(options.n)},
                        {"tol", format_double(options.optimizer.tol)},
                        {"mu_sq", format_double(options.optimizer.mu_sq)},
                        {"max_sweeps", std::to_string(options.optimizer.max_sweeps)}};

  std::vector<double> conditions;
  std::vector<std::vector<ExperimentRecord>> slots;
  std::vector<std::function<void()>> tasks;

  auto add_task = [&](std::function<std::vector<ExperimentRecord>()> body) {
    slots.emplace_back();
    const std::size_t slot = slots.size() - 1;
    tasks.push_back([slot, body = std::move(body), &slots] { slots[slot] = body(); });
  };

  if (name == "reconstruction") {
    conditions = {-2.0, -1.0, 0.0, 1.0, 2.0};
    for (const double mean_log_sigma : conditions) {
      for (int seed = 0; seed < options.seeds; ++seed) {
        add_task([=]() {
          SynthConfig sc;
          sc.m = options.m;
          sc.k = options.k;
          sc.n = options.n;
          sc.mean_log_sigma = mean_log_sigma;
          sc.seed = static_cast<std::uint64_t>(seed);
          auto [data, truth] = generate_dataset(sc);
          const OptimizerConfig cfg = with_seed(options.optimizer, sc.seed);

          const GroupIcaResult concat = concat_ica(data, options.k, cfg);
          const ModelParams init = params_from_unmixing(concat.unmixing, cfg.mu_sq);
          const FitResult avica = fit_mle(data, cfg, init);
          const FitResult mvica = mvica_fit(data, cfg, init);
          const GroupIcaResult perm = perm_ica(data, cfg);

          std::vector<ExperimentRecord> recs;
          for (const auto& [method, sources] :
               {MethodSources{"avica-mle", avica.sources}, MethodSources{"mvica", mvica.sources},
                MethodSources{"concat", concat.sources}, MethodSources{"perm", perm.sources}})
            recs.push_back({mean_log_sigma, sc.seed, method, "reconstruction_error",
                            reconstruction_error(truth.sources, sources)});
          return recs;
        });
      }
    }
  } else if (name == "convergence") {
    conditions = {0.0};
    if (!options.out_dir.empty()) fs::create_directories(options.out_dir);
    for (int seed = 0; seed < options.seeds; ++seed) {
      add_task([=]() {
        SynthConfig sc;
        sc.m = options.m;
        sc.k = options.k;
        sc.n = options.n;
        sc.seed = static_cast<std::uint64_t>(seed);
        auto [data, truth] = generate_dataset(sc);

        OptimizerConfig mle_cfg = with_seed(options.optimizer, sc.seed);
        mle_cfg.mu_sq = 0.0;  // both optimizers target the same likelihood
        EmConfig em_cfg;
        em_cfg.tol = mle_cfg.tol;
        em_cfg.mu_sq = 0.0;
        em_cfg.max_sweeps = mle_cfg.max_sweeps;
        em_cfg.ls_max_halvings = mle_cfg.ls_max_halvings;
        em_cfg.hess_floor = mle_cfg.hess_floor;
        em_cfg.seed = sc.seed;

        const FitResult mle = run_avica_mle(data, mle_cfg);
        const FitResult em = run_avica_em(data, em_cfg);

        std::vector<ExperimentRecord> recs;
        for (const auto& [method, fit] :
             std::initializer_list<std::pair<std::string, const FitResult*>>{
                 {"avica-mle", &mle}, {"avica-em", &em}}) {
          if (!options.out_dir.empty())
            write_trace_csv((fs::path(options.out_dir) /
                             ("trace_" + method + "_seed" + std::to_string(seed) + ".csv"))
                                .string(),
                            fit->trace, true);
          const auto& last = fit->trace.sweeps.back();
          recs.push_back({0.0, sc.seed, method, "final_nll", last.nll});
          recs.push_back({0.0, sc.seed, method, "final_grad_inf", final_grad_inf(fit->trace)});
          recs.push_back(
              {0.0, sc.seed, method, "sweeps", static_cast<double>(fit->trace.sweeps.size())});
          recs.push_back({0.0, sc.seed, method, "seconds", last.seconds});
        }
        return recs;
      });
    }
  } else if (name == "adaptive-scaling") {
    for (double e = -2.0; e <= 2.0 + 1e-9; e += 0.5) conditions.push_back(std::pow(10.0, e));
    for (const double var2 : conditions) {
      for (int seed = 0; seed < options.seeds; ++seed) {
        add_task([=]() {
          ScaledNoisePairConfig pc;
          pc.n = options.n;
          pc.var_view2 = var2;
          pc.seed = static_cast<std::uint64_t>(seed);
          auto [data, truth] = generate_scaled_noise_pair(pc);
          const OptimizerConfig cfg = with_seed(options.optimizer, pc.seed);

          const GroupIcaResult concat = concat_ica(data, 1, cfg);
          const ModelParams init = params_from_unmixing(concat.unmixing, cfg.mu_sq);
          const FitResult avica = fit_mle(data, cfg, init);
          const FitResult mvica = mvica_fit(data, cfg, init);
          const GroupIcaResult perm = perm_ica(data, cfg);

          std::vector<ExperimentRecord> recs;
          for (const auto& [method, sources] :
               {MethodSources{"avica-mle", avica.sources}, MethodSources{"mvica", mvica.sources},
                MethodSources{"concat", concat.sources}, MethodSources{"perm", perm.sources}})
            recs.push_back({var2, pc.seed, method, "reconstruction_error",
                            reconstruction_error(truth.sources, sources)});
          return recs;
        });
      }
    }
  } else if (name == "precision-recovery") {
    conditions = {0.0};
    for (int seed = 0; seed < options.seeds; ++seed) {
      add_task([=]() {
        SynthConfig sc;
        sc.m = options.m;
        sc.k = options.k;
        sc.n = options.n;
        sc.seed = static_cast<std::uint64_t>(seed);
        auto [data, truth] = generate_dataset(sc);
        const OptimizerConfig cfg = with_seed(options.optimizer, sc.seed);

        const FitResult avica = run_avica_mle(data, cfg);
        const Alignment al = align_sources(truth.sources, avica.sources);
        const double err = precision_error(truth.precision, avica.params.precision, al);
        const double uniform =
            (truth.precision.array() - 1.0 / options.m).square().sum();

        return std::vector<ExperimentRecord>{
            {0.0, sc.seed, "avica-mle", "precision_error", err},
            {0.0, sc.seed, "uniform", "precision_error", uniform}};
      });
    }
  } else if (name == "transfer") {
    conditions = {0.0};
    for (int seed = 0; seed < options.seeds; ++seed) {
      add_task([=]() {
        SynthConfig sc;
        sc.m = options.m;
        sc.k = options.k;
        sc.n = options.n;
        sc.seed = static_cast<std::uint64_t>(seed);
        auto [data, truth] = generate_dataset(sc);
        const Eigen::Index n_train = (4 * data.n_samples()) / 5;
        const MultiViewDataset train = take_columns(data, 0, n_train);
        const MultiViewDataset test =
            take_columns(data, n_train, data.n_samples() - n_train);
        const OptimizerConfig cfg = with_seed(options.optimizer, sc.seed);

        const GroupIcaResult concat = concat_ica(train, options.k, cfg);
        const ModelParams init = params_from_unmixing(concat.unmixing, cfg.mu_sq);
        const FitResult avica = fit_mle(train, cfg, init);
        const FitResult mvica = mvica_fit(train, cfg, init);
        const GroupIcaResult perm = perm_ica(train, cfg);

        const Matrix uniform = Matrix::Constant(options.m, options.k, 1.0 / options.m);
        std::vector<ExperimentRecord> recs;
        recs.push_back({0.0, sc.seed, "avica-mle", "r2",
                        transfer_r2(avica.params.unmixing, avica.params.precision, test)});
        recs.push_back(
            {0.0, sc.seed, "mvica", "r2", transfer_r2(mvica.params.unmixing, uniform, test)});
        recs.push_back({0.0, sc.seed, "concat", "r2", transfer_r2(concat.unmixing, uniform, test)});
        recs.push_back({0.0, sc.seed, "perm", "r2", transfer_r2(perm.unmixing, uniform, test)});
        return recs;
      });
    }
  } else {
    throw std::invalid_argument("unknown experiment: " + name);
  }

  run_tasks(tasks, options.threads);
  for (auto& slot : slots)
    report.records.insert(report.records.end(), slot.begin(), slot.end());
  return report;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

void write_report_files(const std::string& dir, const ExperimentReport& report) {
  fs::create_directories(dir);

  std::ofstream raw((fs::path(dir) / "report.csv").string());
  if (!raw) throw std::runtime_error("cannot write report.csv");
  raw << "# avica-report v1 name=" << report.name << '\n';
  for (const auto& [key, value] : report.config_echo)
    raw << "# config " << key << '=' << value << '\n';
  raw << "condition,seed,method,metric,value\n";
  for (const auto& r : report.records)
    raw << format_double(r.condition) << ',' << r.seed << ',' << r.method << ',' << r.metric
        << ',' << format_double(r.value) << '\n';

  // Group by (condition, method, metric) preserving first-seen order.
  std::vector<std::tuple<double, std::string, std::string>> keys;
  std::map<std::tuple<double, std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : report.records) {
    const auto key = std::make_tuple(r.condition, r.method, r.metric);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(r.value);
  }

  std::ofstream summary((fs::path(dir) / "summary.csv").string());
  if (!summary) throw std::runtime_error("cannot write summary.csv");
  summary << "# avica-summary v1 name=" << report.name << '\n';
  summary << "condition,method,metric,median,q1,q3,count\n";
  for (const auto& key : keys) {
    const auto& values = groups[key];
    summary << format_double(std::get<0>(key)) << ',' << std::get<1>(key) << ','
            << std::get<2>(key) << ',' << format_double(quantile(values, 0.5)) << ','
            << format_double(quantile(values, 0.25)) << ','
            << format_double(quantile(values, 0.75)) << ',' << values.size() << '\n';
  }
}

}  // namespace avica
