#include "selfgoal/parsers.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <stdexcept>

#include "selfgoal/errors.hpp"

namespace selfgoal {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t nl = s.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(s.substr(start));
            break;
        }
        lines.push_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.pop_back();
    return lines;
}

std::vector<int> parse_selected_ids(const std::string& reply, int k, int max_index) {
    if (k < 1) throw std::invalid_argument("parse_selected_ids: k must be >= 1");

    static const std::regex ids_re(R"("IDs"\s*:\s*\[([^\]]*)\])");
    std::smatch last;
    bool found = false;
    auto begin = std::sregex_iterator(reply.begin(), reply.end(), ids_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        last = *it;
        found = true;
    }
    if (!found) throw ParseError("no \"IDs\": [...] object in reply");

    const std::string body = last[1].str();
    std::vector<int> out;
    static const std::regex num_re(R"([-+]?\d+)");
    for (auto it = std::sregex_iterator(body.begin(), body.end(), num_re);
         it != std::sregex_iterator(); ++it) {
        int v = std::stoi(it->str());
        if (v < 0 || v > max_index) continue;
        if (std::find(out.begin(), out.end(), v) != out.end()) continue;
        out.push_back(v);
        if (static_cast<int>(out.size()) == k) break;
    }
    return out;
}

namespace {

// Strips a leading enumeration marker; returns true when one was present.
bool strip_marker(std::string& line) {
    std::string t = trim(line);
    if (t.empty()) {
        line = t;
        return false;
    }
    std::size_t i = 0;
    if (t[i] == '-' || t[i] == '*') {
        line = trim(t.substr(i + 1));
        return true;
    }
    std::size_t j = i;
    while (j < t.size() && std::isdigit(static_cast<unsigned char>(t[j]))) ++j;
    if (j > i && j < t.size() && (t[j] == '.' || t[j] == ')' || t[j] == ':')) {
        line = trim(t.substr(j + 1));
        return true;
    }
    line = t;
    return false;
}

}  // namespace

std::vector<std::string> parse_subgoal_list(const std::string& reply, int cap) {
    if (cap < 1) throw std::invalid_argument("parse_subgoal_list: cap must be >= 1");
    auto lines = split_lines(reply);

    std::vector<std::string> marked;
    std::vector<std::string> plain;
    for (auto& raw : lines) {
        std::string line = raw;
        bool had_marker = strip_marker(line);
        if (line.empty()) continue;
        if (had_marker) marked.push_back(line);
        plain.push_back(line);
    }
    auto& chosen = marked.empty() ? plain : marked;
    if (static_cast<int>(chosen.size()) > cap) chosen.resize(static_cast<std::size_t>(cap));
    return chosen;
}

bool clin_line_valid(const std::string& line) {
    static const std::regex clin_re(
        R"(^(.+\S)\s+(MAY BE NECCESSARY|SHOULD BE NECCESSARY|MAY BE CONTRIBUTE|DOES NOT CONTRIBUTE)\s+to\s+(\S.*)$)");
    std::string t = trim(line);
    strip_marker(t);
    return std::regex_match(t, clin_re);
}

std::vector<std::string> parse_clin_learnings(const std::string& reply) {
    std::vector<std::string> out;
    for (const auto& raw : split_lines(reply)) {
        std::string line = raw;
        strip_marker(line);
        if (line.empty()) continue;
        if (clin_line_valid(line)) out.push_back(line);
    }
    return out;
}

}  // namespace selfgoal
