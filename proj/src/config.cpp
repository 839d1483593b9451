#include "ctql/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "ctql/error.hpp"

namespace ctql {

std::string_view to_string(Problem p) {
  return p == Problem::Feedback ? "feedback" : "tracking";
}

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Alg1: return "alg1";
    case Algorithm::Alg2: return "alg2";
    case Algorithm::Alg3: return "alg3";
    case Algorithm::Alg4: return "alg4";
    case Algorithm::Alg5: return "alg5";
  }
  return "?";
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::Config, what); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_scalar(const std::string& key, const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  // "a/b" is accepted so amplitudes can be written as in the experiment notes.
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    return parse_scalar(key, trim(text.substr(0, slash))) /
           parse_scalar(key, trim(text.substr(slash + 1)));
  }
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || std::isnan(v)) {
    fail("key '" + key + "': cannot parse number '" + text + "'");
  }
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  const double v = parse_scalar(key, text);
  if (v != std::floor(v) || std::abs(v) > 1e9) fail("key '" + key + "': expected an integer");
  return static_cast<int>(v);
}

Matrix parse_matrix(const std::string& key, const std::string& text) {
  const auto rows = split(text, ';');
  if (rows.empty()) fail("key '" + key + "': empty matrix");
  std::vector<std::vector<double>> vals;
  for (const auto& r : rows) {
    std::vector<double> row;
    for (const auto& e : split(r, ',')) row.push_back(parse_scalar(key, e));
    if (!vals.empty() && row.size() != vals.front().size()) {
      fail("key '" + key + "': ragged matrix rows");
    }
    vals.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(vals.size()), static_cast<Eigen::Index>(vals[0].size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = vals[i][j];
  }
  return m;
}

Vector parse_vector(const std::string& key, const std::string& text) {
  const auto items = split(text, ',');
  Vector v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) v[i] = parse_scalar(key, items[i]);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail("key '" + key + "': expected true or false");
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string render_matrix(const Matrix& m) {
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

std::string render_vector(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) s += ", ";
    s += num(v[i]);
  }
  return s;
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(what);
}

}  // namespace

void CampaignConfig::validate() const {
  const Eigen::Index nn = A.rows();
  require(nn > 0 && A.cols() == nn, "A must be square and non-empty");
  require(B.rows() == nn && B.cols() > 0, "B must have as many rows as A");
  const Eigen::Index mm = B.cols();
  require(M.rows() == nn && M.cols() == nn, "M must be n x n");
  require(R.rows() == mm && R.cols() == mm, "R must be m x m");
  require(A.allFinite() && B.allFinite() && M.allFinite() && R.allFinite(),
          "matrices must be finite");
  require(gamma >= 0.0 && std::isfinite(gamma), "gamma must be finite and >= 0");
  require(!(lambda <= 0.0), "lambda must be positive");
  if (problem == Problem::Feedback) {
    require(x0.size() == nn, "x0 must have n entries");
    require(algorithm != Algorithm::Alg1 || gamma == 0.0, "alg1 is undiscounted");
  } else {
    require(A_r.rows() == nn && A_r.cols() == nn, "A_r must be n x n");
    require(xr0.size() == nn, "xr0 must have n entries");
    require(x0.size() == 0 || x0.size() == nn, "x0 must have n entries");
    require(constrained(), "tracking campaigns run alg4 or alg5");
    require(gamma > 0.0, "tracking needs a positive discount gamma");
  }
  if (constrained()) {
    require(std::isfinite(lambda), "alg4/alg5 need a finite lambda");
    const Matrix off = R - Matrix(R.diagonal().asDiagonal());
    require(off.isZero(0.0) && (R.diagonal().array() > 0.0).all(),
            "alg4/alg5 need a positive diagonal R");
  } else {
    require(std::isinf(lambda), "lambda applies to alg4/alg5 only");
    require(gamma == 0.0, "alg1-alg3 solve the undiscounted regulator");
  }
  require(episodes >= 1 && bank_episodes >= 1, "episode counts must be >= 1");
  require(T > 0.0 && dt > 0.0 && dt < T, "need 0 < dt < T");
  require(intervals >= 1, "intervals must be >= 1");
  require(amplitude > 0.0, "amplitude must be positive");
  require(eps > 0.0, "eps must be positive");
  require(max_iter >= 1, "max_iter must be >= 1");
  require(window >= 0, "window must be >= 0");
  require(!out.empty(), "out must not be empty");
}

std::string CampaignConfig::render() const {
  std::ostringstream os;
  os << "name = " << name << "\n";
  os << "problem = " << to_string(problem) << "\n";
  os << "algorithm = " << to_string(algorithm) << "\n";
  os << "A = " << render_matrix(A) << "\n";
  os << "B = " << render_matrix(B) << "\n";
  if (problem == Problem::Tracking) os << "A_r = " << render_matrix(A_r) << "\n";
  os << "M = " << render_matrix(M) << "\n";
  os << "R = " << render_matrix(R) << "\n";
  os << "gamma = " << num(gamma) << "\n";
  os << "lambda = " << num(lambda) << "\n";
  if (x0.size() > 0) os << "x0 = " << render_vector(x0) << "\n";
  if (problem == Problem::Tracking) os << "xr0 = " << render_vector(xr0) << "\n";
  os << "episodes = " << episodes << "\n";
  os << "bank_episodes = " << bank_episodes << "\n";
  os << "T = " << num(T) << "\n";
  os << "dt = " << num(dt) << "\n";
  os << "N = " << intervals << "\n";
  os << "seed = " << seed << "\n";
  os << "amplitude = " << num(amplitude) << "\n";
  os << "eps = " << num(eps) << "\n";
  os << "max_iter = " << max_iter << "\n";
  os << "window = " << window << "\n";
  os << "resets = " << (resets ? "true" : "false") << "\n";
  os << "out = " << out << "\n";
  return os.str();
}

CampaignConfig parse_config(std::string_view text) {
  CampaignConfig c;
  std::set<std::string> seen;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) fail("duplicate key '" + key + "'");

    if (key == "name") {
      c.name = val;
    } else if (key == "problem") {
      if (val == "feedback") c.problem = Problem::Feedback;
      else if (val == "tracking") c.problem = Problem::Tracking;
      else fail("problem must be feedback or tracking");
    } else if (key == "algorithm") {
      bool ok = false;
      for (Algorithm a : {Algorithm::Alg1, Algorithm::Alg2, Algorithm::Alg3, Algorithm::Alg4,
                          Algorithm::Alg5}) {
        if (val == to_string(a)) {
          c.algorithm = a;
          ok = true;
        }
      }
      if (!ok) fail("algorithm must be one of alg1..alg5");
    } else if (key == "A") {
      c.A = parse_matrix(key, val);
    } else if (key == "B") {
      c.B = parse_matrix(key, val);
    } else if (key == "A_r") {
      c.A_r = parse_matrix(key, val);
    } else if (key == "M") {
      c.M = parse_matrix(key, val);
    } else if (key == "R") {
      c.R = parse_matrix(key, val);
    } else if (key == "gamma") {
      c.gamma = parse_scalar(key, val);
    } else if (key == "lambda") {
      c.lambda = parse_scalar(key, val);
    } else if (key == "x0") {
      c.x0 = parse_vector(key, val);
    } else if (key == "xr0") {
      c.xr0 = parse_vector(key, val);
    } else if (key == "episodes") {
      c.episodes = parse_int(key, val);
    } else if (key == "bank_episodes") {
      c.bank_episodes = parse_int(key, val);
    } else if (key == "T") {
      c.T = parse_scalar(key, val);
    } else if (key == "dt") {
      c.dt = parse_scalar(key, val);
    } else if (key == "N") {
      c.intervals = parse_int(key, val);
    } else if (key == "seed") {
      const int s = parse_int(key, val);
      if (s < 0) fail("seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "amplitude") {
      c.amplitude = parse_scalar(key, val);
    } else if (key == "eps") {
      c.eps = parse_scalar(key, val);
    } else if (key == "max_iter") {
      c.max_iter = parse_int(key, val);
    } else if (key == "window") {
      c.window = parse_int(key, val);
    } else if (key == "resets") {
      c.resets = parse_bool(key, val);
    } else if (key == "out") {
      c.out = val;
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  for (const char* k : {"problem", "algorithm", "A", "B", "M", "R"}) {
    if (!seen.count(k)) fail(std::string("missing key '") + k + "'");
  }
  if (!seen.count("max_iter")) c.max_iter = c.episodes;
  c.validate();
  return c;
}

CampaignConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace ctql
