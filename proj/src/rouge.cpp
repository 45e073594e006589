#include "swd/rouge.hpp"

namespace swd::rouge {

Variant parse_variant(const std::string& text) {
  if (text == "1" || text == "rouge-1") return Variant::kRouge1;
  if (text == "2" || text == "rouge-2") return Variant::kRouge2;
  if (text == "l" || text == "L" || text == "rouge-l") return Variant::kRougeL;
  throw ArgumentError("unknown ROUGE variant '" + text + "' (expected 1, 2 or l)");
}

Measure parse_measure(const std::string& text) {
  if (text == "p" || text == "precision") return Measure::kPrecision;
  if (text == "r" || text == "recall") return Measure::kRecall;
  if (text == "f" || text == "f1") return Measure::kF;
  throw ArgumentError("unknown ROUGE measure '" + text + "' (expected p, r or f)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kRouge1:
      return "rouge-1";
    case Variant::kRouge2:
      return "rouge-2";
    case Variant::kRougeL:
      return "rouge-l";
  }
  return "?";
}

std::string measure_name(Measure m) {
  switch (m) {
    case Measure::kPrecision:
      return "p";
    case Measure::kRecall:
      return "r";
    case Measure::kF:
      return "f";
  }
  return "?";
}

}  // namespace swd::rouge
