#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctql/config.hpp"
#include "ctql/learning.hpp"

namespace ctql {

/// Per-iteration record common to every learner. For the constrained
/// learners P is unvec_s(W) and K the equivalent linear gain.
struct TraceRow {
  int iter = 0;
  Matrix P;
  Matrix K;
  double delta = 0.0;
  double residual = 0.0;
  double condition_number = 0.0;
  long rank = 0;
  double dP = 0.0;  // |P - P_oracle|_2
  double dK = 0.0;  // |K - K_oracle|_2
};

/// One line of the error table.
struct TableRow {
  std::string problem;      // feedback | tracking
  std::string fingerprint;  // identifies the plant instance
  std::string algorithm;
  double dP = 0.0;
  double dK = 0.0;
  int converged_at = -1;
  std::string status;
};

struct CampaignReport {
  CampaignConfig config;
  std::vector<TraceRow> trace;
  TerminationStatus status = TerminationStatus::MaxIterations;
  std::string message;
  int converged_at = -1;
  int episodes = 0;  // learner episodes, excluding initialization data
  double max_abs_input = 0.0;
  double seconds = 0.0;
  Matrix P_oracle;
  Matrix K_oracle;
  double oracle_residual = 0.0;
  Matrix K0;  // initial admissible gain (linear form)
  std::vector<std::string> notes;  // initialization log

  double final_dP() const { return trace.empty() ? 0.0 : trace.back().dP; }
  double final_dK() const { return trace.empty() ? 0.0 : trace.back().dK; }
  TableRow row() const;
};

/// Builds the plant, initial gain and oracle, runs the learner and scores it.
/// Deterministic given the config. Algorithm errors propagate with the
/// campaign name prepended.
CampaignReport run_campaign(const CampaignConfig& cfg);

/// "# ctq-trace v1" followed by long-format `iter,quantity,value` rows.
std::string trace_csv(const CampaignReport& report);
std::string report_text(const CampaignReport& report);
std::string table_csv(const std::vector<TableRow>& rows);

/// Writes trace.csv, report.txt and table.csv into `dir` (created if needed).
void write_outputs(const CampaignReport& report, const std::filesystem::path& dir);

/// Rows must describe one problem instance; throws MixedProblem otherwise.
std::vector<TableRow> error_table(const std::vector<TableRow>& rows);

/// Reads every table.csv found in `dir` or its immediate subdirectories.
std::vector<TableRow> read_table_rows(const std::filesystem::path& dir);

/// Model-based reference for the campaign: P*, K* (linear gain) and residual.
struct OracleReport {
  Matrix P;
  Matrix K;
  double residual = 0.0;
  int iterations = 0;
};
OracleReport model_oracle(const CampaignConfig& cfg);

}  // namespace ctql
