#include "consent_audit/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace consent_audit::text {

std::string normalize(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      // punctuation and whitespace both act as separators
      pending_space = true;
    }
  }
  return out;
}

std::vector<std::string> tokens(const std::string& normalized) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : normalized) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double token_jaccard(const std::vector<std::string>& a,
                     const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double similarity(const std::string& raw_a, const std::string& raw_b) {
  const std::string a = normalize(raw_a);
  const std::string b = normalize(raw_b);
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  double jac = token_jaccard(tokens(a), tokens(b));
  std::size_t maxlen = std::max(a.size(), b.size());
  double lev = 1.0 - static_cast<double>(edit_distance(a, b)) /
                         static_cast<double>(maxlen);
  return std::max(jac, lev);
}

bool contains_phrase(const std::string& normalized_haystack,
                     const std::string& normalized_needle) {
  if (normalized_needle.empty()) return false;
  // word-boundary aware substring search
  std::size_t pos = 0;
  while ((pos = normalized_haystack.find(normalized_needle, pos)) !=
         std::string::npos) {
    bool left_ok = pos == 0 || normalized_haystack[pos - 1] == ' ';
    std::size_t end = pos + normalized_needle.size();
    bool right_ok = end == normalized_haystack.size() ||
                    normalized_haystack[end] == ' ';
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

}  // namespace consent_audit::text
