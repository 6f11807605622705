#pragma once

#include <array>
#include <map>
#include <span>
#include <vector>

namespace agepost {

struct AgeBand {
  int lo;
  int hi;  // inclusive; the last band is open-ended
};

// Adience groups: 0-2, 4-6, 8-13, 15-20, 25-32, 38-43, 48-53, 60+.
inline constexpr std::array<AgeBand, 8> kAdienceGroups{{
    {0, 2}, {4, 6}, {8, 13}, {15, 20}, {25, 32}, {38, 43}, {48, 53}, {60, 1000}}};

// Index of the group containing `age`, else the group with the nearest edge;
// equidistant gap ages go to the younger group.
int age_to_group(int age);

struct MetricReport {
  double mae = 0.0;
  double exact_group_acc = 0.0;
  double one_off_acc = 0.0;
  std::map<int, double> ca;  // CA(n) counts |pred - truth| <= n
  double recall_pm3 = 0.0;
  std::size_t count = 0;
};

inline constexpr std::array<int, 3> kDefaultCaLevels{3, 5, 7};

// Throws LengthMismatch on misaligned inputs, InvalidArgument when empty.
MetricReport evaluate(std::span<const int> predicted, std::span<const int> truth,
                      std::span<const int> ca_levels = kDefaultCaLevels);

struct GroupAccuracy {
  double exact = 0.0;
  double one_off = 0.0;
};

// For predictions already expressed as group indices.
GroupAccuracy evaluate_groups(std::span<const int> predicted_group, std::span<const int> truth_group);

}  // namespace agepost
