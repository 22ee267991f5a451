#pragma once

// Question-conditioned image abstraction: a global description, then details
// of the marked regions most related to the question.

#include "unac/domain.hpp"
#include "unac/session.hpp"

#include <string>
#include <vector>

namespace unac {

inline constexpr int kMaxLocalDetails = 8;

/// One abstract_global call with the marked image.
std::string abstract_global(Session& session, const MarkedImage& marked, const Task& task);

struct ParsedLocal {
  std::vector<int> relevant_ids;
  std::vector<LocalDetail> details;
  std::vector<std::string> warnings;
};

/// Parses the RELEVANT / DETAIL lines against the legend. Ids outside the
/// legend are dropped with a warning; at most kMaxLocalDetails survive.
ParsedLocal parse_local(const std::string& response, const MarkedImage& marked);

/// One abstract_local call when the legend is non-empty, none otherwise.
Abstraction abstract_local(Session& session, const MarkedImage& marked, const Task& task,
                           const std::string& global_description);

/// The abstraction as prompt text for the later stages.
std::string render_abstraction(const Abstraction& abstraction);

}  // namespace unac
