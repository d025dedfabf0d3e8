#pragma once

#include <string>
#include <vector>

namespace consent_audit::text {

// Lowercase, strip punctuation (including trailing asterisks), collapse
// whitespace. The common currency for all fuzzy comparisons.
std::string normalize(const std::string& s);

std::vector<std::string> tokens(const std::string& normalized);

// Levenshtein distance, plain dynamic programming.
std::size_t edit_distance(const std::string& a, const std::string& b);

// |A ∩ B| / |A ∪ B| over token sets; 1.0 when both are empty.
double token_jaccard(const std::vector<std::string>& a,
                     const std::vector<std::string>& b);

// max(token-Jaccard, 1 - edit_distance/max_len) over normalized inputs.
double similarity(const std::string& raw_a, const std::string& raw_b);

bool contains_phrase(const std::string& normalized_haystack,
                     const std::string& normalized_needle);

}  // namespace consent_audit::text
