#pragma once

#include <string>

namespace blab {

enum class Verdict { holds, fails, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::fails: return "fails";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

} // namespace blab
