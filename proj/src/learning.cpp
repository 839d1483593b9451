#include "ctql/learning.hpp"

namespace ctql {

const char* to_string(TerminationStatus s) {
  switch (s) {
    case TerminationStatus::Converged: return "converged";
    case TerminationStatus::MaxIterations: return "max_iterations";
    case TerminationStatus::Diverged: return "diverged";
  }
  return "unknown";
}

}  // namespace ctql
