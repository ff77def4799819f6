#include "energetext/stemmer.hpp"

namespace energetext {
namespace {

bool is_consonant(const std::string& w, std::size_t i) {
  switch (w[i]) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
      return false;
    case 'y':
      return i == 0 || !is_consonant(w, i - 1);
    default:
      return true;
  }
}

// Number of VC sequences in w[0, len).
int measure(const std::string& w, std::size_t len) {
  int m = 0;
  std::size_t i = 0;
  while (i < len && is_consonant(w, i)) ++i;
  while (i < len) {
    while (i < len && !is_consonant(w, i)) ++i;
    if (i >= len) break;
    while (i < len && is_consonant(w, i)) ++i;
    ++m;
  }
  return m;
}

bool has_vowel(const std::string& w, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i)
    if (!is_consonant(w, i)) return true;
  return false;
}

bool ends_with(const std::string& w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool ends_double_consonant(const std::string& w) {
  const std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1);
}

// consonant-vowel-consonant ending where the last consonant is not w, x or y.
bool ends_cvc(const std::string& w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  if (!is_consonant(w, n - 3) || is_consonant(w, n - 2) || !is_consonant(w, n - 1)) return false;
  const char c = w[n - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

void step_plural(std::string& w) {
  if (ends_with(w, "sses")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "ies")) {
    if (w.size() > 4) w.resize(w.size() - 2);
  } else if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) {
    // caress, plus, analysis
  } else if (ends_with(w, "s") && w.size() > 3) {
    w.pop_back();
  }
}

void step_ed_ing(std::string& w) {
  if (ends_with(w, "eed")) {
    if (measure(w, w.size() - 3) > 0) w.pop_back();
    return;
  }
  std::size_t cut = 0;
  if (ends_with(w, "ed") && has_vowel(w, w.size() - 2)) {
    cut = 2;
  } else if (ends_with(w, "ing") && has_vowel(w, w.size() - 3)) {
    cut = 3;
  }
  if (cut == 0) return;
  w.resize(w.size() - cut);
  if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
    w.push_back('e');
  } else if (ends_double_consonant(w)) {
    const char c = w.back();
    if (c != 'l' && c != 's' && c != 'z') w.pop_back();
  } else if (measure(w, w.size()) == 1 && ends_cvc(w)) {
    w.push_back('e');
  }
}

void step_derivational(std::string& w) {
  if (ends_with(w, "ization") && measure(w, w.size() - 7) > 0) {
    w.resize(w.size() - 7);
    w += "ize";
  } else if (ends_with(w, "ational") && measure(w, w.size() - 7) > 0) {
    w.resize(w.size() - 7);
    w += "ate";
  }
}

}  // namespace

std::string stem_once(std::string_view word) {
  std::string w(word);
  if (w.size() <= 2) return w;
  step_plural(w);
  step_ed_ing(w);
  step_derivational(w);
  return w;
}

std::string stem(std::string_view word) {
  std::string cur(word);
  // Every rule either shortens the word or leaves it alone except the +e
  // repairs, which only follow a longer cut, so this terminates quickly.
  for (int i = 0; i < 16; ++i) {
    std::string next = stem_once(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

}  // namespace energetext
