#pragma once

// Frozen output of tests/oracles/derive.py.

namespace oracle {

inline constexpr double kNdcgExample = 0.9197207891481877;
inline constexpr double kMacroFHalfPrecision = 0.6666666666666666;
inline constexpr double kPrfHalfRecallF1 = 0.6666666666666666;
inline constexpr double kDisjointSimilarity = 0.2;
inline constexpr int kBound07_1e4 = 30;
inline constexpr int kBound05_1e3 = 11;
inline constexpr double kFixedPointFB = 0.5537757437070938;
inline constexpr double kFixedPointFC = 0.5125858123569793;
inline constexpr double kFixedPointGC = 0.7;
inline constexpr double kStackTfidf = 3.4657359027997265;
inline constexpr int kSiblingDistance = 2;
inline constexpr double kSiblingLocality = 0.3333333333333333;

}  // namespace oracle
