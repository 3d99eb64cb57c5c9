#include "poisonscan/provider.hpp"

#include <cctype>

namespace poisonscan {

void GenerationRequest::validate() const {
  if (prompt.empty()) throw std::invalid_argument("generate: prompt must be non-empty");
  if (max_new_tokens < 1) throw std::invalid_argument("generate: max_new_tokens must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("generate: top_p must be in (0,1]");
  if (temperature < 0.0) throw std::invalid_argument("generate: temperature must be >= 0");
}

std::vector<std::string> simple_tokenize(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    size_t start = i;
    // leading whitespace attaches to the following word
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i < n && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
      while (i < n && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) ++i;
    } else if (i < n) {
      ++i;  // single punctuation char
    }
    out.push_back(text.substr(start, i - start));
  }
  return out;
}

const char* finish_reason_name(FinishReason r) {
  switch (r) {
    case FinishReason::Length: return "length";
    case FinishReason::Stop: return "stop";
    case FinishReason::Error: return "error";
  }
  return "stop";
}

FinishReason finish_reason_from(const std::string& name) {
  if (name == "length") return FinishReason::Length;
  if (name == "error") return FinishReason::Error;
  return FinishReason::Stop;
}

}  // namespace poisonscan
