#include <cmath>
#include <set>

#include "docie/corpus.hpp"
#include "docie/error.hpp"
#include "docie/typing.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace docie;

namespace {

Schema typing_schema() {
  Schema s;
  s.entity_types = {"person", "organization", "location"};
  s.relations = {"r"};
  s.entities = {"Q1"};
  s.fine_types = {"f1", "f2", "f3", "f4", "f5"};
  s.fine_relations = {"P1"};
  return s;
}

TypePrediction pred_with_argmax(int type_index, int n_types) {
  TypePrediction p;
  p.et_final_scores.assign(n_types, 0.1);
  p.et_final_scores[type_index] = 0.9;
  p.et_ed_scores = {0.5};
  return p;
}

}  // namespace

TEST_CASE("et heads shapes and zero-weight scores") {
  ParamStore store;
  Rng rng(2);
  TypingHeads zero;
  zero.final_weight = store.create("et.final.weight", 8, 3, 0.0, rng);
  zero.final_bias = store.create("et.final.bias", 1, 3, 0.0, rng);
  zero.ed_weight = store.create("et.ed.weight", 8, 5, 0.0, rng);
  zero.ed_bias = store.create("et.ed.bias", 1, 5, 0.0, rng);

  Tensor mentions = gradcheck::random_tensor(4, 8, rng);
  auto preds = et_forward(mentions, zero);
  REQUIRE(preds.size() == 4);
  CHECK(preds[0].et_final_scores.size() == 3);
  CHECK(preds[0].et_ed_scores.size() == 5);
  for (const auto& p : preds) {
    for (double s : p.et_final_scores) CHECK(s == doctest::Approx(0.5));
    for (double s : p.et_ed_scores) CHECK(s == doctest::Approx(0.5));
  }
}

TEST_CASE("et_loss") {
  const Schema schema = typing_schema();
  ParamStore store;
  Rng rng(6);
  TypingHeads heads = make_typing_heads(store, 8, 3, 5, rng);
  Tensor mentions = gradcheck::random_param(3, 8, rng);

  SUBCASE("saturated prediction gives near-zero loss") {
    Tensor logits = Tensor::from_values(
        1, 3, {30.0, -30.0, -30.0});
    Tensor loss = et_loss(logits, {{"person"}}, schema);
    CHECK(loss.item() < 1e-10);
    CHECK(loss.item() >= 0.0);
  }

  SUBCASE("matches a per-element BCE oracle") {
    Tensor logits = et_final_logits(mentions, heads);
    std::vector<std::vector<std::string>> gold = {
        {"person"}, {"organization", "location"}, {}};
    const double loss = et_loss(logits, gold, schema).item();
    double expected = 0.0;
    std::vector<std::vector<double>> targets = {
        {1, 0, 0}, {0, 1, 1}, {0, 0, 0}};
    for (int m = 0; m < 3; ++m)
      for (int t = 0; t < 3; ++t) {
        const double z = logits.at(m, t);
        const double p = 1.0 / (1.0 + std::exp(-z));
        expected +=
            -(targets[m][t] * std::log(p) + (1 - targets[m][t]) * std::log(1 - p));
      }
    expected /= 9.0;
    CHECK(loss == doctest::Approx(expected).epsilon(1e-9));
  }

  SUBCASE("gradient through the ET_ed head is exactly zero") {
    store.zero_grads();
    Tensor loss = et_loss(et_final_logits(mentions, heads), {{"person"}, {}, {}},
                          schema);
    backward(loss);
    for (double g : heads.ed_weight.grad()) CHECK(g == 0.0);
    for (double g : heads.ed_bias.grad()) CHECK(g == 0.0);
    bool any = false;
    for (double g : heads.final_weight.grad()) any = any || g != 0.0;
    CHECK(any);
  }

  SUBCASE("unknown gold type is a contract error") {
    Tensor logits = et_final_logits(mentions, heads);
    CHECK_THROWS_AS(et_loss(logits, {{"alien"}, {}, {}}, schema),
                    ContractError);
  }
}

TEST_CASE("aggregate_cluster_type") {
  const Schema schema = typing_schema();

  SUBCASE("most frequent picks the modal argmax type") {
    std::vector<TypePrediction> preds = {pred_with_argmax(0, 3),
                                         pred_with_argmax(0, 3),
                                         pred_with_argmax(1, 3)};
    CHECK(aggregate_cluster_type(preds, TypeAggregation::kMostFrequent,
                                 schema) ==
          std::vector<std::string>{"person"});
  }

  SUBCASE("ties break toward the lower schema index") {
    std::vector<TypePrediction> preds = {pred_with_argmax(1, 3),
                                         pred_with_argmax(0, 3)};
    CHECK(aggregate_cluster_type(preds, TypeAggregation::kMostFrequent,
                                 schema) ==
          std::vector<std::string>{"person"});
  }

  SUBCASE("union merges thresholded type sets") {
    TypePrediction a, b;
    a.et_final_scores = {0.9, 0.2, 0.1};
    b.et_final_scores = {0.8, 0.7, 0.3};
    CHECK(aggregate_cluster_type({a, b}, TypeAggregation::kUnion, schema) ==
          std::vector<std::string>{"person", "organization"});
  }

  SUBCASE("union is idempotent under mention duplication") {
    TypePrediction a;
    a.et_final_scores = {0.9, 0.6, 0.1};
    auto once = aggregate_cluster_type({a}, TypeAggregation::kUnion, schema);
    auto twice =
        aggregate_cluster_type({a, a, a}, TypeAggregation::kUnion, schema);
    CHECK(once == twice);
  }

  SUBCASE("most frequent output is a member of the input multiset") {
    Rng rng(12);
    for (int iter = 0; iter < 100; ++iter) {
      std::vector<TypePrediction> preds;
      std::set<int> argmaxes;
      const int n = 1 + static_cast<int>(rng.randint(0, 4));
      for (int m = 0; m < n; ++m) {
        const int t = static_cast<int>(rng.randint(0, 2));
        argmaxes.insert(t);
        preds.push_back(pred_with_argmax(t, 3));
      }
      auto out =
          aggregate_cluster_type(preds, TypeAggregation::kMostFrequent, schema);
      REQUIRE(out.size() == 1);
      CHECK(argmaxes.count(schema.type_index(out[0])) == 1);
    }
  }

  SUBCASE("empty cluster is a contract error") {
    CHECK_THROWS_AS(
        aggregate_cluster_type({}, TypeAggregation::kMostFrequent, schema),
        ContractError);
  }
}
