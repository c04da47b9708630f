#pragma once

#include <string>
#include <vector>

namespace selfgoal {

/// Extracts the last well-formed `"IDs": [...]` object from a reply (replies
/// carry reasoning prose first). Returns up to k distinct indices in
/// [0, max_index], preserving reply order; out-of-range and duplicate entries
/// are silently dropped. Throws ParseError when no such object exists.
std::vector<int> parse_selected_ids(const std::string& reply, int k, int max_index);

/// Splits a reply into candidate subgoal strings by enumerated-list markers
/// (leading "1." / "1)" / "-" / "*"); when no marker line exists, every
/// nonempty line counts. Markers and whitespace stripped, empties dropped,
/// result truncated to cap. Never throws on arbitrary text.
std::vector<std::string> parse_subgoal_list(const std::string& reply, int cap);

/// True iff the line (enumeration stripped) matches one of the four causal
/// templates, e.g. "X MAY BE NECCESSARY to Y." (template spelling intact).
bool clin_line_valid(const std::string& line);

/// Numbered lines from a reply that pass clin_line_valid, markers stripped.
std::vector<std::string> parse_clin_learnings(const std::string& reply);

std::string trim(const std::string& s);
std::vector<std::string> split_lines(const std::string& s);

}  // namespace selfgoal
