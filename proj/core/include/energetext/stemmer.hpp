#pragma once

#include <string>
#include <string_view>

namespace energetext {

/// Rule-based suffix stripper: Porter step 1a (plurals), step 1b (-ed/-ing with
/// the at/bl/iz, double-consonant and cvc repairs) and the -ization -> -ize and
/// -ational -> -ate rules. Rules are applied until nothing changes, so
/// stem(stem(w)) == stem(w). Input is expected to be lowercase [a-z0-9]; digits
/// count as consonants.
std::string stem(std::string_view word);

/// A single pass of the rules (no fixpoint iteration).
std::string stem_once(std::string_view word);

}  // namespace energetext
