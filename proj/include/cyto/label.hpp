#pragma once

#include <stdexcept>
#include <string>

namespace cyto {

enum class ClassLabel { Normal, Abnormal };

inline const char* to_string(ClassLabel l) {
  return l == ClassLabel::Abnormal ? "abnormal" : "normal";
}

inline ClassLabel parse_label(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "normal") return ClassLabel::Normal;
  if (s == "abnormal") return ClassLabel::Abnormal;
  throw std::runtime_error("unknown label token '" + s + "'");
}

}  // namespace cyto
