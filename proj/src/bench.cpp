#include "ctql/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctql/error.hpp"
#include "ctql/oracle.hpp"
#include "ctql/plant.hpp"
#include "ctql/qlearn_constrained.hpp"
#include "ctql/qlearn_lqr.hpp"
#include "ctql/stabilizer.hpp"
#include "ctql/tensor.hpp"

namespace ctql {

namespace {

// Seeds of the initialization data, offset from the campaign seed so the
// learner's excitation never coincides with them.
constexpr std::uint64_t kResetSeedOffset = 2;
constexpr std::uint64_t kBehaviorResetSeedOffset = 4;
constexpr std::uint64_t kOnPolicyResetSeedOffset = 6;
constexpr std::uint64_t kOracleSampleSeed = 11;
constexpr int kOracleSamples = 500;
constexpr int kInitResets = 10;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string matrix_line(const Matrix& m) {
  std::string s;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i > 0) s += "; ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) s += ", ";
      s += num(m(i, j));
    }
  }
  return s;
}

std::string fingerprint(const CampaignConfig& c) {
  // FNV-1a over the plant description.
  std::string text = std::string(to_string(c.problem)) + "|" + matrix_line(c.A) + "|" +
                     matrix_line(c.B);
  if (c.problem == Problem::Tracking) {
    text += "|" + matrix_line(c.A_r) + "|" + matrix_line(Matrix(c.xr0));
  }
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LearningConfig learning_config(const CampaignConfig& c) {
  LearningConfig lc;
  lc.eps = c.eps;
  lc.max_iter = c.max_iter;
  lc.intervals = c.intervals;
  lc.T = c.T;
  lc.seed = c.seed;
  lc.amplitude = c.amplitude;
  lc.mode = c.constrained() ? SolveMode::LeastSquares : SolveMode::Strict;
  lc.window = c.window;
  return lc;
}

CostOracle make_cost(const CampaignConfig& c, const Matrix& Q) {
  if (c.constrained()) return CostOracle::constrained(Q, c.R.diagonal(), c.lambda);
  return CostOracle::quadratic(Q, c.R);
}

Matrix output_map(const CampaignConfig& c) {
  const Eigen::Index n = c.n();
  if (c.problem == Problem::Feedback) return Matrix::Identity(n, n);
  Matrix C = Matrix::Zero(n, 2 * n);
  C.leftCols(n).setIdentity();
  return C;
}

void append_row(CampaignReport& rep, int iter, const Matrix& P, const Matrix& K, double delta,
                double residual, double cond, long rank) {
  TraceRow row;
  row.iter = iter;
  row.P = P;
  row.K = K;
  row.delta = delta;
  row.residual = residual;
  row.condition_number = cond;
  row.rank = rank;
  rep.trace.push_back(std::move(row));
}

template <class TraceT>
void copy_status(CampaignReport& rep, const TraceT& tr) {
  rep.status = tr.status;
  rep.message = tr.message;
  rep.converged_at = tr.converged_at;
  rep.episodes = tr.episodes;
  rep.max_abs_input = tr.max_abs_input;
}

void fill_lqr(CampaignReport& rep, const LqrTrace& tr) {
  copy_status(rep, tr);
  for (const auto& it : tr.iterates) {
    append_row(rep, it.iter, it.P, it.K, it.delta_P, it.residual, it.condition_number,
               static_cast<long>(it.rank));
  }
}

void fill_constrained(CampaignReport& rep, const ConstrainedTrace& tr) {
  copy_status(rep, tr);
  for (const auto& it : tr.iterates) {
    append_row(rep, it.iter, unvec_s(it.W), it.K_linear, it.delta_W, it.residual,
               it.condition_number, static_cast<long>(it.rank));
  }
}

void score(CampaignReport& rep) {
  for (auto& row : rep.trace) {
    row.dP = spectral_norm(row.P - rep.P_oracle);
    row.dK = spectral_norm(row.K - rep.K_oracle);
  }
}

std::vector<TrajectorySegment> behavior_episodes(Plant& plant, const ControlLaw& behavior,
                                                 const CampaignConfig& c) {
  std::vector<TrajectorySegment> segs;
  for (int e = 0; e < c.bank_episodes; ++e) {
    auto more = plant.run_episode(behavior, c.T, c.intervals);
    segs.insert(segs.end(), more.begin(), more.end());
  }
  return segs;
}

void run_feedback(const CampaignConfig& c, CampaignReport& rep) {
  const LtiSystem sys{c.A, c.B};
  const CostOracle cost = make_cost(c, c.M);
  const LearningConfig lc = learning_config(c);
  const ControlLaw behavior = behavior_policy(c.seed, c.amplitude, c.m(), c.lambda);

  // Off-policy data bank; also feeds the LMI initializer.
  Plant bank_plant(sys, cost, c.x0, c.dt);
  const LqrBank bank = collect_lqr_data(behavior_episodes(bank_plant, behavior, c));
  const LmiResult lmi = lmi_stabilizing_gain(bank);
  rep.K0 = lmi.K;
  rep.notes.push_back("lmi varpi = " + short_num(lmi.varpi) + ", margin = " +
                      short_num(lmi.margin));

  const OracleReport orc = model_oracle(c);
  if (!c.constrained()) {
    rep.P_oracle = orc.P;
    rep.K_oracle = orc.K;
    rep.oracle_residual = orc.residual;
  }

  switch (c.algorithm) {
    case Algorithm::Alg1: {
      Plant plant(sys, cost, c.x0, c.dt);
      OnPolicyOptions opts;
      opts.reset_allowed = c.resets;
      opts.reset_seed = c.seed + kOnPolicyResetSeedOffset;
      fill_lqr(rep, alg1_run(plant, bank, lmi.K, lc, opts));
      break;
    }
    case Algorithm::Alg2:
      fill_lqr(rep, alg2_run(bank, lmi.K, lc));
      break;
    case Algorithm::Alg3: {
      Plant plant(sys, cost, c.x0, c.dt);
      fill_lqr(rep, alg3_run(plant, lmi.K, lc));
      break;
    }
    case Algorithm::Alg4:
    case Algorithm::Alg5: {
      const BasisSpec basis = quadratic_basis(c.n());
      const ConstrainedSetup setup{basis, c.gamma, c.lambda};
      Plant plant(sys, cost, c.x0, c.dt);
      const Matrix K0 = basis_gain_from_linear(lmi.K, basis);
      const ConstrainedTrace tr = c.algorithm == Algorithm::Alg4
                                      ? alg4_run(plant, K0, setup, lc)
                                      : alg5_run(plant, K0, setup, lc);
      fill_constrained(rep, tr);
      const ConstrainedProblem prob{c.A, c.B, c.M, c.R.diagonal(), c.gamma, c.lambda, basis};
      const auto samples = sample_box(tr.state_extent, kOracleSamples, kOracleSampleSeed);
      const auto co =
          constrained_pi_oracle(prob, basis_gain_from_linear(orc.K, basis), samples);
      rep.P_oracle = unvec_s(co.W);
      rep.K_oracle = co.K_linear;
      rep.oracle_residual = co.residual;
      rep.notes.push_back("constrained oracle: " + std::to_string(co.iterations) +
                          " iterations over " + std::to_string(kOracleSamples) +
                          " states in the visited box");
      break;
    }
  }
}

void run_tracking(const CampaignConfig& c, CampaignReport& rep) {
  const Eigen::Index n = c.n();
  const AugmentedSystem aug = augment(c.A, c.B, c.A_r);
  const Matrix C = output_map(c);
  const Matrix Q = C.transpose() * c.M * C;
  const CostOracle cost = make_cost(c, Q);
  const LearningConfig lc = learning_config(c);
  const Vector x0 = c.x0.size() > 0 ? c.x0 : Vector::Zero(n);
  Vector X0(2 * n);
  X0 << x0 - c.xr0, c.xr0;

  // Initialization data on a separate copy of the plant: zero-input resets
  // for M and the Gramian, behavior resets for the input matrix.
  Plant init(aug.dynamics(), cost, X0, c.dt);
  const auto resets =
      collect_reset_segments(init, kInitResets, c.T, c.intervals, c.seed + kResetSeedOffset);
  const Matrix M_hat = estimate_M(resets, C);
  const ControlLaw behavior = behavior_policy(c.seed, c.amplitude, c.m(), c.lambda);
  const auto behavior_resets = collect_reset_segments(
      init, kInitResets, c.T, c.intervals, c.seed + kBehaviorResetSeedOffset, &behavior);
  const PiBEstimate pb = estimate_pi_b(collect_lqr_data(behavior_resets));
  const GramianResult gr = gramian_admissible_gain(resets, c.gamma, M_hat, C, pb.B);
  const AdmissibilityCheck check = bounded_closed_loop_check(aug.dynamics(), X0, c.lambda);
  const SearchResult sr = admissible_search(gr.K_hyp, kDefaultScaleGrid, check);
  rep.K0 = sr.K;
  rep.notes.push_back("gramian residual = " + short_num(gr.residual) +
                      ", admissible scale = " + short_num(sr.scale));

  const BasisSpec basis = quadratic_basis(2 * n);
  const ConstrainedSetup setup{basis, c.gamma, c.lambda};
  Plant plant(aug.dynamics(), cost, X0, c.dt);
  const Matrix K0 = basis_gain_from_linear(sr.K, basis);
  const ConstrainedTrace tr = c.algorithm == Algorithm::Alg4 ? alg4_run(plant, K0, setup, lc)
                                                             : alg5_run(plant, K0, setup, lc);
  fill_constrained(rep, tr);

  const OracleReport lqt = model_oracle(c);
  const ConstrainedProblem prob{aug.F, aug.G, Q, c.R.diagonal(), c.gamma, c.lambda, basis};
  const auto samples = sample_box(tr.state_extent, kOracleSamples, kOracleSampleSeed);
  const auto co = constrained_pi_oracle(prob, basis_gain_from_linear(lqt.K, basis), samples);
  rep.P_oracle = unvec_s(co.W);
  rep.K_oracle = co.K_linear;
  rep.oracle_residual = co.residual;
  rep.notes.push_back("constrained oracle: " + std::to_string(co.iterations) +
                      " iterations over " + std::to_string(kOracleSamples) +
                      " states in the visited box");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(line);
  while (std::getline(is, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

TableRow CampaignReport::row() const {
  TableRow r;
  r.problem = std::string(to_string(config.problem));
  r.fingerprint = fingerprint(config);
  r.algorithm = std::string(to_string(config.algorithm));
  r.dP = final_dP();
  r.dK = final_dK();
  r.converged_at = converged_at;
  r.status = to_string(status);
  return r;
}

OracleReport model_oracle(const CampaignConfig& c) {
  OracleReport out;
  OracleSolution sol;
  if (c.problem == Problem::Feedback) {
    sol = discounted_lqt_oracle(c.A, c.B, output_map(c), c.M, c.R, c.gamma);
  } else {
    const AugmentedSystem aug = augment(c.A, c.B, c.A_r);
    sol = discounted_lqt_oracle(aug.F, aug.G, output_map(c), c.M, c.R, c.gamma);
  }
  out.P = sol.P_star;
  out.K = sol.K_star;
  out.residual = sol.residual;
  out.iterations = sol.iterations;
  return out;
}

CampaignReport run_campaign(const CampaignConfig& cfg) {
  cfg.validate();
  CampaignReport rep;
  rep.config = cfg;
  const auto start = std::chrono::steady_clock::now();
  try {
    if (cfg.problem == Problem::Feedback) {
      run_feedback(cfg, rep);
    } else {
      run_tracking(cfg, rep);
    }
  } catch (const Error& e) {
    throw Error(e.code(), "campaign '" + cfg.name + "': " + e.what());
  }
  score(rep);
  rep.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

std::string trace_csv(const CampaignReport& rep) {
  std::ostringstream os;
  os << "# ctq-trace v1\n";
  os << "iter,quantity,value\n";
  for (const auto& row : rep.trace) {
    const std::string it = std::to_string(row.iter) + ",";
    os << it << "delta," << num(row.delta) << "\n";
    os << it << "residual," << num(row.residual) << "\n";
    os << it << "cond," << num(row.condition_number) << "\n";
    os << it << "rank," << row.rank << "\n";
    os << it << "dP," << num(row.dP) << "\n";
    os << it << "dK," << num(row.dK) << "\n";
    for (Eigen::Index i = 0; i < row.P.rows(); ++i) {
      for (Eigen::Index j = i; j < row.P.cols(); ++j) {
        os << it << "P_" << i + 1 << "_" << j + 1 << "," << num(row.P(i, j)) << "\n";
      }
    }
    for (Eigen::Index i = 0; i < row.K.rows(); ++i) {
      for (Eigen::Index j = 0; j < row.K.cols(); ++j) {
        os << it << "K_" << i + 1 << "_" << j + 1 << "," << num(row.K(i, j)) << "\n";
      }
    }
  }
  return os.str();
}

std::string report_text(const CampaignReport& rep) {
  std::ostringstream os;
  os << "# ctq-report v1\n\n[config]\n" << rep.config.render() << "\n[result]\n";
  os << "status = " << to_string(rep.status) << "\n";
  if (!rep.message.empty()) os << "message = " << rep.message << "\n";
  os << "converged_at = " << rep.converged_at << "\n";
  os << "iterations = " << rep.trace.size() << "\n";
  os << "episodes = " << rep.episodes << "\n";
  os << "final_dP = " << num(rep.final_dP()) << "\n";
  os << "final_dK = " << num(rep.final_dK()) << "\n";
  os << "max_abs_input = " << num(rep.max_abs_input) << "\n";
  os << "oracle_residual = " << num(rep.oracle_residual) << "\n";
  os << "wall_seconds = " << short_num(rep.seconds) << "\n";
  os << "\n[initialization]\n";
  os << "K0 = " << matrix_line(rep.K0) << "\n";
  for (const auto& note : rep.notes) os << "note = " << note << "\n";
  os << "\n[oracle]\n";
  os << "P = " << matrix_line(rep.P_oracle) << "\n";
  os << "K = " << matrix_line(rep.K_oracle) << "\n";
  if (!rep.trace.empty()) {
    os << "\n[final]\n";
    os << "P = " << matrix_line(rep.trace.back().P) << "\n";
    os << "K = " << matrix_line(rep.trace.back().K) << "\n";
  }
  return os.str();
}

std::string table_csv(const std::vector<TableRow>& rows) {
  std::ostringstream os;
  os << "problem,fingerprint,algorithm,dP,dK,converged_at,status\n";
  for (const auto& r : rows) {
    os << r.problem << "," << r.fingerprint << "," << r.algorithm << "," << num(r.dP) << ","
       << num(r.dK) << "," << r.converged_at << "," << r.status << "\n";
  }
  return os.str();
}

void write_outputs(const CampaignReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::Config, "cannot write " + (dir / name).string());
    out << text;
  };
  put("trace.csv", trace_csv(rep));
  put("report.txt", report_text(rep));
  put("table.csv", table_csv({rep.row()}));
}

std::vector<TableRow> error_table(const std::vector<TableRow>& rows) {
  for (const auto& r : rows) {
    if (r.problem != rows.front().problem || r.fingerprint != rows.front().fingerprint) {
      throw Error(ErrorCode::MixedProblem, "rows from " + rows.front().problem + "/" +
                                               rows.front().fingerprint + " and " + r.problem +
                                               "/" + r.fingerprint);
    }
  }
  std::vector<TableRow> out = rows;
  std::stable_sort(out.begin(), out.end(),
                   [](const TableRow& a, const TableRow& b) { return a.algorithm < b.algorithm; });
  return out;
}

std::vector<TableRow> read_table_rows(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::exists(dir / "table.csv")) files.push_back(dir / "table.csv");
  if (fs::is_directory(dir)) {
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "table.csv")) {
        subdirs.push_back(entry.path() / "table.csv");
      }
    }
    std::sort(subdirs.begin(), subdirs.end());
    files.insert(files.end(), subdirs.begin(), subdirs.end());
  }
  if (files.empty()) throw Error(ErrorCode::Config, "no table.csv under " + dir.string());
  std::vector<TableRow> rows;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cols = split_csv(line);
      if (cols.size() != 7) throw Error(ErrorCode::Config, "malformed row in " + f.string());
      TableRow r;
      r.problem = cols[0];
      r.fingerprint = cols[1];
      r.algorithm = cols[2];
      r.dP = std::strtod(cols[3].c_str(), nullptr);
      r.dK = std::strtod(cols[4].c_str(), nullptr);
      r.converged_at = std::atoi(cols[5].c_str());
      r.status = cols[6];
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

}  // namespace ctql
