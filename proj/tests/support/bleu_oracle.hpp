#pragma once

#include <string>

namespace mobsim::test {

// Reference BLEU-2 (uniform 1-/2-gram weights, brevity penalty) used to
// cross-check the production text-similarity scorer. Tokenization is
// lowercase with splits on every non-alphanumeric character.
double bleu2_reference(const std::string& candidate, const std::string& reference);

}  // namespace mobsim::test
