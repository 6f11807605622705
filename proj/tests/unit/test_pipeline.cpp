#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "agepost/pipeline.hpp"
#include "agepost/simulation.hpp"
#include "../support/oracles.hpp"
#include "../support/test_util.hpp"

using namespace agepost;

namespace {

const AgeGrid kGrid{0, 70};

std::vector<ReferenceItem> pool_of(std::initializer_list<int> ages, Gender g = Gender::Male) {
  std::vector<ReferenceItem> pool;
  for (int a : ages) pool.push_back({"r" + std::to_string(a) + "-" + std::to_string(pool.size()), "", a, g});
  return pool;
}

QueryItem query(std::string id, Gender g = Gender::Male, std::optional<int> hint = std::nullopt) {
  QueryItem q;
  q.id = std::move(id);
  q.gender = g;
  q.rough_age_hint = hint;
  return q;
}

}  // namespace

TEST_CASE("three below and three above around the rough age") {
  const auto pool = pool_of({10, 20, 25, 35, 50, 60});
  const auto refs = select_references(query("q"), pool, SelectionPolicy{}, 30);
  REQUIRE(refs.size() == 6);
  for (int i = 0; i < 3; ++i) CHECK(refs[i].age < 30);
  for (int i = 3; i < 6; ++i) CHECK(refs[i].age > 30);
  std::set<std::string> ids;
  for (const auto& r : refs) ids.insert(r.id);
  CHECK(ids.size() == 6);
}

TEST_CASE("single reference above") {
  SelectionPolicy p;
  p.num_below = 0;
  p.num_above = 1;
  const auto refs = select_references(query("q"), pool_of({40}), p, 30);
  REQUIRE(refs.size() == 1);
  CHECK(refs[0].age == 40);
}

TEST_CASE("gender stratum must be fillable") {
  const auto pool = pool_of({10, 20, 25, 35, 50, 60}, Gender::Male);
  CHECK_CODE(select_references(query("q", Gender::Female), pool, SelectionPolicy{}, 30),
             ErrorCode::InsufficientPool);
  SelectionPolicy relaxed;
  relaxed.gender_match_required = false;
  CHECK(select_references(query("q", Gender::Female), pool, relaxed, 30).size() == 6);
  // Unknown query gender matches anyone.
  CHECK(select_references(query("q", Gender::Unknown), pool, SelectionPolicy{}, 30).size() == 6);
  CHECK_CODE(select_references(query("q"), std::vector<ReferenceItem>{}, SelectionPolicy{}, 30),
             ErrorCode::InsufficientPool);
}

TEST_CASE("policy validation") {
  SelectionPolicy p;
  p.num_below = -1;
  CHECK_CODE(p.validate(), ErrorCode::InvalidArgument);
  p.num_below = 0;
  p.num_above = 0;
  CHECK_CODE(p.validate(), ErrorCode::InvalidArgument);
}

TEST_CASE("age window limits the strata") {
  SelectionPolicy p;
  p.max_age_gap = 10;
  const auto pool = pool_of({5, 21, 22, 23, 37, 38, 39, 55});
  for (int trial = 0; trial < 20; ++trial) {
    const auto refs = select_references(query("q" + std::to_string(trial)), pool, p, 30);
    for (const auto& r : refs) CHECK(std::abs(r.age - 30) <= 10);
  }
  p.num_below = 4;
  CHECK_CODE(select_references(query("q"), pool, p, 30), ErrorCode::InsufficientPool);
}

TEST_CASE("fallback relaxes gender first, then widens") {
  std::vector<ReferenceItem> pool = pool_of({20, 25, 28}, Gender::Male);
  for (auto& r : pool_of({32, 35, 40}, Gender::Female)) pool.push_back(r);
  auto sel = select_references_with_fallback(query("q", Gender::Male), pool, SelectionPolicy{}, 30);
  CHECK(sel.fallback == SelectionFallback::RelaxedGender);
  CHECK(sel.references.size() == 6);

  const auto edge = pool_of({0, 0, 0, 1, 2, 3});
  sel = select_references_with_fallback(query("q"), edge, SelectionPolicy{}, 0);
  CHECK(sel.fallback == SelectionFallback::WidenedStratum);
  CHECK(sel.references.size() == 6);

  sel = select_references_with_fallback(query("q"), pool_of({10, 20, 25, 35, 50, 60}), SelectionPolicy{}, 30);
  CHECK(sel.fallback == SelectionFallback::None);

  CHECK_CODE(select_references_with_fallback(query("q"), pool_of({40}), SelectionPolicy{}, 30),
             ErrorCode::InsufficientPool);
}

TEST_CASE("selection properties over random pools") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ReferenceItem> pool;
    const int n = rng.uniform_int(6, 60);
    for (int i = 0; i < n; ++i) {
      pool.push_back({"r" + std::to_string(i), "", rng.uniform_int(0, 70),
                      rng.bernoulli(0.5) ? Gender::Male : Gender::Female});
    }
    SelectionPolicy p;
    p.rng_seed = rng.next_u64();
    p.num_below = rng.uniform_int(0, 3);
    p.num_above = rng.uniform_int(1, 3);
    const auto q = query("q" + std::to_string(trial), rng.bernoulli(0.5) ? Gender::Male : Gender::Female);
    const int rough = rng.uniform_int(10, 60);
    std::vector<ReferenceItem> a, b;
    try {
      a = select_references(q, pool, p, rough);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientPool);
      continue;
    }
    b = select_references(q, pool, p, rough);
    CHECK(a == b);
    std::set<std::string> ids;
    for (const auto& r : a) {
      ids.insert(r.id);
      CHECK(r.gender == q.gender);
    }
    CHECK(ids.size() == a.size());
    CHECK(a.size() == static_cast<std::size_t>(p.num_below + p.num_above));
  }
}

TEST_CASE("different seeds pick different references") {
  std::vector<ReferenceItem> pool;
  for (int a = 0; a <= 70; ++a) pool.push_back({"r" + std::to_string(a), "", a, Gender::Male});
  std::set<std::vector<std::string>> seen;
  for (std::uint64_t s = 0; s < 10; ++s) {
    SelectionPolicy p;
    p.rng_seed = s;
    std::vector<std::string> ids;
    for (const auto& r : select_references(query("q"), pool, p, 35)) ids.push_back(r.id);
    seen.insert(ids);
  }
  CHECK(seen.size() > 5);
}

TEST_CASE("rough age estimate") {
  CHECK(rough_age_estimate(query("q", Gender::Male, 42), kGrid) == 42);
  CHECK(rough_age_estimate(query("q"), kGrid) == 35);
  CHECK(rough_age_estimate(query("q"), 25) == 25);
}

TEST_CASE("ground truth from an exact age") {
  const auto gt = build_gt_posterior(ExactAge{30}, kGrid);
  double z = 0.0;
  for (int a = 0; a <= 70; ++a) z += std::exp(-0.5 * (a - 30) * (a - 30) / 4.0);
  CHECK(std::abs(gt.at(30) - 1.0 / z) <= 1e-15);
  CHECK(std::abs(gt.at(30) - 0.19947) <= 1e-5);
  CHECK(mode(gt) == 30);
  for (int d = 1; d <= 30; ++d) CHECK(gt.at(30 - d) == doctest::Approx(gt.at(30 + d)).epsilon(1e-15));
  for (int x = 5; x <= 65; ++x) {
    const auto g = build_gt_posterior(ExactAge{x}, kGrid);
    CHECK(mode(g) == x);
    CHECK(confidence_interval(g, 0.9).width() <= 8);
  }
  CHECK_CODE(build_gt_posterior(ExactAge{90}, kGrid), ErrorCode::InvalidArgument);
}

TEST_CASE("ground truth from an age group") {
  const auto g = build_gt_posterior(AgeGroup{25, 32}, kGrid);
  for (int a = 0; a <= 70; ++a) CHECK(g.at(a) == (a >= 25 && a <= 32 ? 1.0 / 8.0 : 0.0));
  const auto open = build_gt_posterior(AgeGroup{60, std::nullopt}, kGrid);
  for (int a = 0; a <= 70; ++a) CHECK(open.at(a) == doctest::Approx(a >= 60 ? 1.0 / 11.0 : 0.0));
  CHECK_CODE(build_gt_posterior(AgeGroup{80, 90}, kGrid), ErrorCode::EmptySupport);
  const auto raw = AgeDistribution::point_mass(kGrid, 12);
  CHECK(build_gt_posterior(RawPosterior{raw}, kGrid) == raw);
  CHECK_CODE(build_gt_posterior(RawPosterior{AgeDistribution::point_mass(AgeGrid(0, 10), 3)}, kGrid),
             ErrorCode::InvalidArgument);
}

TEST_CASE("finalize six truthful bracketing comparisons") {
  const LogisticModel model(0.36);
  const auto prior = AgeDistribution::uniform(kGrid);
  SimulatedAnnotator annotator(0.36, 1, AnnotatorMode::Truthful);
  std::vector<ComparisonEvent> events;
  for (int k : {24, 27, 29, 31, 33, 36}) events.push_back(annotator.simulate_comparison(30, k));
  const auto rec = finalize_annotation("q1", events, model, prior);
  CHECK(rec.status == AnnotationStatus::Labelled);
  CHECK(std::abs(rec.mode - 30) <= 3);
  CHECK(rec.events == events);
  const auto ci = confidence_interval(rec.posterior, 0.9);
  CHECK(rec.ci_lo == ci.lo);
  CHECK(rec.ci_hi == ci.hi);
}

TEST_CASE("finalize contradictory comparisons discards") {
  const LogisticModel model(0.36);
  const std::vector<ComparisonEvent> events{{60, Outcome::Older, "a", "", ""},
                                            {10, Outcome::Younger, "b", "", ""}};
  const auto rec = finalize_annotation("q1", events, model, AgeDistribution::uniform(kGrid));
  CHECK(rec.status == AnnotationStatus::Discarded);
  CHECK(rec.ci_hi - rec.ci_lo > 15);
  CHECK_CODE(finalize_annotation("q1", {}, model, AgeDistribution::uniform(kGrid)), ErrorCode::NoEvidence);
}
