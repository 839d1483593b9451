// Command-line front end: runs campaigns, prints oracles and error tables.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "ctql/bench.hpp"
#include "ctql/config.hpp"
#include "ctql/error.hpp"
#include "ctql/plant.hpp"
#include "ctql/regression.hpp"

namespace {

using namespace ctql;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAlgorithm = 3;

struct Overrides {
  std::optional<int> seed;
  std::optional<std::string> out;
  std::optional<double> dt;
  std::optional<double> eps;
  std::optional<int> max_iter;

  void attach(CLI::App* app) {
    app->add_option("--seed", seed, "excitation seed");
    app->add_option("--out", out, "output directory");
    app->add_option("--dt", dt, "integration step, s");
    app->add_option("--eps", eps, "convergence tolerance");
    app->add_option("--max-iter", max_iter, "iteration limit");
  }

  void apply(CampaignConfig& c) const {
    if (seed) {
      if (*seed < 0) throw Error(ErrorCode::Config, "seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(*seed);
    }
    if (out) c.out = *out;
    if (dt) c.dt = *dt;
    if (eps) c.eps = *eps;
    if (max_iter) c.max_iter = *max_iter;
    c.validate();
  }
};

int report_error(const Error& e) {
  std::fprintf(stderr, "ERR:%s %s\n", std::string(to_string(e.code())).c_str(), e.what());
  return e.code() == ErrorCode::Config ? kExitConfig : kExitAlgorithm;
}

std::string summary(const CampaignReport& rep) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: %s after %zu iterations, |dP| = %.4g, |dK| = %.4g (%.2f s)",
                rep.config.name.c_str(), to_string(rep.status), rep.trace.size(), rep.final_dP(),
                rep.final_dK(), rep.seconds);
  return buf;
}

void print_matrix(const char* label, const Matrix& m) {
  std::printf("%s =\n", label);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) std::printf(" % .10f", m(i, j));
    std::printf("\n");
  }
}

int cmd_run(const std::string& path, const Overrides& ov) {
  CampaignConfig cfg = load_config(path);
  ov.apply(cfg);
  const CampaignReport rep = run_campaign(cfg);
  write_outputs(rep, cfg.out);
  std::printf("%s\n", summary(rep).c_str());
  if (rep.status == TerminationStatus::Diverged) {
    std::fprintf(stderr, "ERR:%s %s\n", std::string(to_string(ErrorCode::Diverged)).c_str(),
                 rep.message.c_str());
    return kExitAlgorithm;
  }
  return kExitOk;
}

int cmd_run_all(const std::vector<std::string>& paths, const Overrides& ov, unsigned jobs) {
  // Load everything first so a bad file fails before any work starts.
  std::vector<CampaignConfig> cfgs;
  for (const auto& p : paths) {
    CampaignConfig c = load_config(p);
    Overrides local = ov;
    if (ov.out) local.out = (std::filesystem::path(*ov.out) / c.name).string();
    local.apply(c);
    cfgs.push_back(std::move(c));
  }
  std::vector<int> codes(cfgs.size(), kExitOk);
  std::vector<std::string> lines(cfgs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      try {
        const CampaignReport rep = run_campaign(cfgs[i]);
        write_outputs(rep, cfgs[i].out);
        lines[i] = summary(rep);
        if (rep.status == TerminationStatus::Diverged) codes[i] = kExitAlgorithm;
      } catch (const Error& e) {
        lines[i] = std::string("ERR:") + std::string(to_string(e.code())) + " " + e.what();
        codes[i] = e.code() == ErrorCode::Config ? kExitConfig : kExitAlgorithm;
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(jobs, cfgs.size()); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  int code = kExitOk;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    (codes[i] == kExitOk ? std::cout : std::cerr) << lines[i] << "\n";
    code = std::max(code, codes[i]);
  }
  return code;
}

int cmd_table(const std::string& dir) {
  const auto rows = error_table(read_table_rows(dir));
  std::printf("%-6s %-12s %-12s %-10s %s\n", "alg", "|dP|", "|dK|", "conv_at", "status");
  for (const auto& r : rows) {
    std::printf("%-6s %-12.4g %-12.4g %-10d %s\n", r.algorithm.c_str(), r.dP, r.dK,
                r.converged_at, r.status.c_str());
  }
  return kExitOk;
}

int cmd_oracle(const std::string& path) {
  const CampaignConfig cfg = load_config(path);
  const OracleReport o = model_oracle(cfg);
  print_matrix("P*", o.P);
  print_matrix("K*", o.K);
  std::printf("iterations = %d\nriccati_residual = %.3e\n", o.iterations, o.residual);
  return kExitOk;
}

int cmd_rankcheck(const std::string& path) {
  const CampaignConfig cfg = load_config(path);
  if (cfg.problem != Problem::Feedback) {
    throw Error(ErrorCode::Config, "rankcheck applies to feedback campaigns");
  }
  const CostOracle cost = cfg.constrained()
                              ? CostOracle::constrained(cfg.M, cfg.R.diagonal(), cfg.lambda)
                              : CostOracle::quadratic(cfg.M, cfg.R);
  Plant plant({cfg.A, cfg.B}, cost, cfg.x0, cfg.dt);
  const ControlLaw behavior = behavior_policy(cfg.seed, cfg.amplitude, cfg.m(), cfg.lambda);
  const auto segs = plant.run_episode(behavior, cfg.T, cfg.intervals);
  const RankDiagnostic rd = rank_check(collect_lqr_data(segs));
  std::printf("rank = %ld\nrequired = %ld\nsatisfied = %s\n", static_cast<long>(rd.rank),
              static_cast<long>(rd.required), rd.satisfied ? "true" : "false");
  if (!rd.satisfied) {
    std::fprintf(stderr, "ERR:%s rank %ld < %ld\n",
                 std::string(to_string(ErrorCode::RankDeficient)).c_str(),
                 static_cast<long>(rd.rank), static_cast<long>(rd.required));
    return kExitAlgorithm;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time Q-learning campaigns for LQR and constrained tracking"};
  app.require_subcommand(1);

  std::string config_path;
  std::string report_dir;
  std::vector<std::string> config_paths;
  unsigned jobs = 0;
  Overrides run_ov;
  Overrides all_ov;

  auto* run = app.add_subcommand("run", "run one campaign");
  run->add_option("config", config_path, "campaign config file")->required();
  run_ov.attach(run);

  auto* run_all = app.add_subcommand("run-all", "run several campaigns concurrently");
  run_all->add_option("configs", config_paths, "campaign config files")->required();
  run_all->add_option("-j,--jobs", jobs, "worker threads (0: hardware concurrency)");
  all_ov.attach(run_all);

  auto* table = app.add_subcommand("table", "print the error table of a report directory");
  table->add_option("dir", report_dir, "directory holding table.csv files")->required();

  auto* oracle = app.add_subcommand("oracle", "print the model-based P* and K*");
  oracle->add_option("config", config_path, "campaign config file")->required();

  auto* rank = app.add_subcommand("rankcheck", "check data richness of one behavior episode");
  rank->add_option("config", config_path, "campaign config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::fprintf(stderr, "ERR:%s %s\n", std::string(to_string(ErrorCode::Config)).c_str(),
                 e.what());
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, run_ov);
    if (run_all->parsed()) return cmd_run_all(config_paths, all_ov, jobs);
    if (table->parsed()) return cmd_table(report_dir);
    if (oracle->parsed()) return cmd_oracle(config_path);
    if (rank->parsed()) return cmd_rankcheck(config_path);
  } catch (const Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ERR:Internal %s\n", e.what());
    return kExitAlgorithm;
  }
  return kExitOk;
}
