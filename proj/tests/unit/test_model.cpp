#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"

using namespace airwrite;
using airwrite::testing::copy_shared_parameters;
using airwrite::testing::desk_config;
using airwrite::testing::eval_logits;
using airwrite::testing::make_params;
using airwrite::testing::probe;
using airwrite::testing::random_constant;
using airwrite::testing::random_features;
using airwrite::testing::random_parameter;

namespace {

Value temporal(const Model& m, const Value& x) {
  NoGradGuard g;
  ForwardContext ctx{Mode::eval, nullptr};
  Value input = x.dim(0) >= m.min_rows() ? x : features_to_value(FeatureSequence(x.dim(0)), m.min_rows());
  return m.temporal_encode(input, ctx);
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

TEST(TemporalEncoder, ClipCountIsCeilOfLengthOverEight) {
  ModelConfig cfg;
  cfg.num_classes = 3;
  Model model(cfg, 1);
  std::mt19937_64 rng(1);
  for (std::size_t T : {8u, 9u, 15u, 16u, 17u, 33u, 64u}) {
    Value z = temporal(model, random_features(T, rng));
    EXPECT_EQ(z.dim(0), ceil_div(T, 8)) << "T=" << T;
    EXPECT_EQ(z.dim(1), 64u);
  }
}

TEST(TemporalEncoder, ShortInputIsPaddedToOneClip) {
  ModelConfig cfg;
  Model model(cfg, 2);
  std::mt19937_64 rng(2);
  FeatureSequence seq(1);
  seq[0].dp = 0.1;
  Value padded = features_to_value(seq, model.min_rows());
  EXPECT_EQ(padded.dim(0), 8u);
  NoGradGuard g;
  ForwardContext ctx{Mode::eval, nullptr};
  EXPECT_EQ(model.temporal_encode(padded, ctx).dim(0), 1u);
  EXPECT_EQ(model.forward(features_to_value(seq), ctx).dim(0), cfg.num_classes);
}

TEST(TemporalEncoder, AllZeroInputStaysFinite) {
  Model model(ModelConfig{}, 3);
  for (Mode mode : {Mode::train, Mode::eval}) {
    std::mt19937_64 rng(0);
    ForwardContext ctx{mode, &rng};
    Value z = model.temporal_encode(Value::zeros({16, 8}), ctx);
    for (double v : z.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(TemporalEncoder, EmptyInputIsAnError) {
  Model model(ModelConfig{}, 3);
  ForwardContext ctx{Mode::eval, nullptr};
  try {
    model.temporal_encode(Value::zeros({0, 8}), ctx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_input);
  }
}

TEST(StrokeGat, IdenticalRowsGiveUniformAttention) {
  std::mt19937_64 rng(4);
  GraphAttentionLayer layer(16, 4, 0.2, rng);
  std::vector<double> row = airwrite::testing::random_vector(16, rng);
  std::vector<double> data;
  for (int i = 0; i < 5; ++i) data.insert(data.end(), row.begin(), row.end());
  std::vector<Value> attention;
  Value out = layer(Value::constant({5, 16}, data), &attention);
  ASSERT_EQ(attention.size(), 4u);
  for (const auto& a : attention)
    for (double v : a.data()) EXPECT_NEAR(v, 0.2, 1e-15);
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(out.data()[i * 16 + c], out.data()[c]);
}

TEST(StrokeGat, SingleNodeIsProjectionThenPRelu) {
  std::mt19937_64 rng(5);
  GraphAttentionLayer layer(8, 2, 0.2, rng);
  Value z = random_constant({1, 8}, rng);
  Value out = layer(z);
  Value want = prelu(linear(z, layer.weight()), layer.slope());
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(out.data()[c], want.data()[c], 1e-15);
}

TEST(StrokeGat, AttentionRowsSumToOne) {
  std::mt19937_64 rng(6);
  GraphAttentionLayer layer(16, 4, 0.2, rng);
  std::vector<Value> attention;
  layer(random_constant({7, 16}, rng, -3.0, 3.0), &attention);
  for (const auto& a : attention)
    for (std::size_t i = 0; i < 7; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 7; ++j) total += a.data()[i * 7 + j];
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(StrokeGat, RowPermutationEquivariance) {
  std::mt19937_64 rng(7);
  ModelConfig cfg = desk_config(Fusion::D);
  cfg.gat_layers = 2;
  StrokeGat gat(cfg, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t l = 2 + static_cast<std::size_t>(trial % 6);
    Value z = random_constant({l, 16}, rng);
    std::vector<std::size_t> perm(l);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> permuted(l * 16);
    for (std::size_t i = 0; i < l; ++i)
      std::copy_n(z.data().begin() + static_cast<std::ptrdiff_t>(perm[i] * 16), 16,
                  permuted.begin() + static_cast<std::ptrdiff_t>(i * 16));
    Value a = gat(z);
    Value b = gat(Value::constant({l, 16}, permuted));
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t c = 0; c < 16; ++c) EXPECT_NEAR(b.data()[i * 16 + c], a.data()[perm[i] * 16 + c], 1e-12);
  }
}

TEST(StrokeGat, GraphLayerPassesGradCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    GraphAttentionLayer layer(8, 2, 0.2, rng);
    Value z = random_parameter({5, 8}, rng);
    ParameterSet params;
    layer.register_in(params, "gat");
    params.add("z", z);
    EXPECT_LT(grad_check([&] { return probe(layer(z), seed); }, params), 1e-6) << "seed " << seed;
  }
}

TEST(StrokeGat, RejectsIndivisibleChannels) {
  ModelConfig cfg = desk_config(Fusion::D);
  cfg.heads = 3;
  std::mt19937_64 rng(0);
  try {
    StrokeGat gat(cfg, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_config);
  }
  EXPECT_THROW(Model(cfg, 0), Error);
}

TEST(Fusion, StrategyDWithZeroedGraphMatchesStrategyA) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Model d(desk_config(Fusion::D, 5), seed);
    Model a(desk_config(Fusion::A, 5), seed + 100);
    copy_shared_parameters(d, a);
    for (auto& [path, v] : d.parameters())
      if (path.rfind("gat.", 0) == 0) std::fill(v.mutable_data().begin(), v.mutable_data().end(), 0.0);
    std::mt19937_64 rng(seed);
    Value x = random_features(40, rng);
    Value ld = eval_logits(d, x);
    Value la = eval_logits(a, x);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(ld.data()[i], la.data()[i], 1e-12);
  }
}

TEST(Fusion, ZeroGraphOutputThroughFuseMatchesStrategyA) {
  Model d(desk_config(Fusion::D, 3), 1);
  Model a(desk_config(Fusion::A, 3), 2);
  copy_shared_parameters(d, a);
  std::mt19937_64 rng(3);
  Value x = random_features(24, rng);
  NoGradGuard g;
  ForwardContext ctx{Mode::eval, nullptr};
  Value z = d.temporal_encode(x, ctx);
  Value fused = d.fuse_and_classify(z, Value::zeros(z.shape()), ctx);
  Value la = a.forward(x, ctx);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(fused.data()[i], la.data()[i], 1e-12);
}

TEST(Fusion, StrategyCWithIdentityGraphOnSingleClipMatchesA) {
  // With one clip, attention is 1; W = I and a unit PReLU slope make the
  // graph encoder the identity.
  Model c(desk_config(Fusion::C, 4), 1);
  Model a(desk_config(Fusion::A, 4), 2);
  copy_shared_parameters(c, a);
  Value w = c.parameters().at("gat.0.weight");
  auto wd = w.mutable_data();
  std::fill(wd.begin(), wd.end(), 0.0);
  for (std::size_t i = 0; i < 16; ++i) wd[i * 16 + i] = 1.0;
  c.parameters().at("gat.0.act.slope").mutable_data()[0] = 1.0;
  std::mt19937_64 rng(4);
  Value x = random_features(8, rng);
  Value lc = eval_logits(c, x);
  Value la = eval_logits(a, x);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(lc.data()[i], la.data()[i], 1e-12);
}

TEST(Fusion, AllStrategiesGiveProbabilityVectors) {
  std::mt19937_64 rng(5);
  FeatureSequence seq = extract_features(airwrite::testing::random_trajectory(rng, 50, 2));
  for (Fusion f : {Fusion::A, Fusion::B, Fusion::C, Fusion::D}) {
    Model m(desk_config(f, 6), 9);
    m.set_labels({"a", "b", "c", "d", "e", "f"});
    Prediction p = m.predict(seq, 6);
    EXPECT_NEAR(std::accumulate(p.probabilities.begin(), p.probabilities.end(), 0.0), 1.0, 1e-9);
    for (std::size_t i = 1; i < p.topk.size(); ++i) EXPECT_GE(p.topk[i - 1].prob, p.topk[i].prob);
    const auto argmax = std::max_element(p.probabilities.begin(), p.probabilities.end()) - p.probabilities.begin();
    EXPECT_EQ(p.top1(), static_cast<std::size_t>(argmax));
  }
}

TEST(Fusion, StrategyBInsertsGraphMidway) {
  ModelConfig cfg = desk_config(Fusion::B);
  EXPECT_EQ(cfg.mid_stage_end(), 4u);
  Model b(cfg, 1);
  EXPECT_TRUE(b.parameters().contains("gat.0.weight"));
}

TEST(Fusion, GraphEncoderAddsParameters) {
  Model a(desk_config(Fusion::A), 0);
  Model d(desk_config(Fusion::D), 0);
  EXPECT_LT(a.parameters().element_count(), d.parameters().element_count());
  EXPECT_FALSE(a.parameters().contains("gat.0.weight"));
  // W [c x c], two attention vectors [d x heads], one PReLU slope.
  EXPECT_EQ(d.parameters().element_count() - a.parameters().element_count(), 16u * 16u + 2u * 4u * 4u + 1u);
}

TEST(Model, EvalForwardIsPure) {
  Model m(desk_config(Fusion::D, 3), 4);
  std::mt19937_64 rng(1);
  Value x = random_features(30, rng);
  Value a = eval_logits(m, x);
  Value b = eval_logits(m, x);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Model, BatchedEvalMatchesSingleSamples) {
  Model m(desk_config(Fusion::D, 3), 4);
  std::mt19937_64 rng(2);
  Value x1 = random_features(20, rng);
  Value x2 = random_features(35, rng);
  NoGradGuard g;
  ForwardContext ctx{Mode::eval, nullptr};
  Batch both = m.forward(Batch{x1, x2}, ctx);
  Value a = m.forward(x1, ctx);
  Value b = m.forward(x2, ctx);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), both[0].data().begin()));
  EXPECT_TRUE(std::equal(b.data().begin(), b.data().end(), both[1].data().begin()));
}

TEST(Model, TrainBatchNormSharesStatisticsAcrossSamples) {
  // Duplicating a sample leaves the joint statistics unchanged, so each copy
  // must produce the single-sample train-mode output.
  ModelConfig cfg = desk_config(Fusion::D, 3);
  cfg.dropout = 0.0;
  Model m(cfg, 4);
  std::mt19937_64 rng(3);
  Value x = random_features(24, rng);
  NoGradGuard g;
  ForwardContext ctx{Mode::train, &rng};
  Value single = m.forward(x, ctx);
  Batch pair = m.forward(Batch{x, x}, ctx);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(pair[0].data()[i], single.data()[i], 1e-9);
    EXPECT_NEAR(pair[1].data()[i], single.data()[i], 1e-9);
  }
}

TEST(Model, EndToEndGradCheck) {
  for (Fusion f : {Fusion::A, Fusion::B, Fusion::C, Fusion::D}) {
    Model m(desk_config(f), 11);
    std::mt19937_64 rng(12);
    Value x = random_features(16, rng);
    ForwardContext ctx{Mode::eval, nullptr};
    auto loss = [&] { return cross_entropy(m.forward(x, ctx), 1); };
    const auto r = grad_check_detailed(loss, m.parameters());
    EXPECT_LT(r.max_relative_error, 1e-4) << to_string(f) << " worst " << r.worst_path;
  }
}

TEST(Model, CtcHeadEmitsPerClipPosteriors) {
  ModelConfig cfg = desk_config(Fusion::D, 4);
  cfg.decoder = Decoder::ctc;
  Model m(cfg, 1);
  m.set_labels({"a", "b", "c"});
  std::mt19937_64 rng(3);
  FeatureSequence seq = extract_features(airwrite::testing::random_trajectory(rng, 42, 1));
  Value lp = m.frame_log_posteriors(seq);
  EXPECT_EQ(lp.dim(0), 5u);
  EXPECT_EQ(lp.dim(1), 4u);
  for (std::size_t t = 0; t < 5; ++t) {
    double total = 0.0;
    for (std::size_t v = 0; v < 4; ++v) total += std::exp(lp.data()[t * 4 + v]);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_THROW(m.predict(seq), Error);
  EXPECT_THROW(m.set_labels({"a", "b", "c", "d"}), Error);
}

TEST(Model, InitialLossIsNearLogK) {
  const auto corpus = synth_generate(airwrite::testing::shipped_templates(), 5, 3);
  std::vector<std::string> labels;
  for (const auto& t : corpus) labels.push_back(*t.label);
  ModelConfig cfg;
  Model m = make_model(cfg, labels, 0);
  const auto samples = prepare_dataset(corpus, cfg.resample_spacing);
  double total = 0.0;
  NoGradGuard g;
  ForwardContext ctx{Mode::eval, nullptr};
  for (const auto& s : samples) total += sample_loss(m, s, ctx).item();
  const double mean = total / static_cast<double>(samples.size());
  EXPECT_NEAR(mean, std::log(20.0), 0.1 * std::log(20.0));
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  ModelConfig cfg = desk_config(Fusion::B, 7);
  cfg.decoder = Decoder::ctc;
  cfg.fc_layers = 3;
  EXPECT_EQ(model_config_from_json(to_json(cfg)), cfg);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"chanels", 4}}), Error);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"fusion", "E"}}), Error);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"channels", "wide"}}), Error);
}

TEST(Config, ValidationRules) {
  auto invalid = [](auto mutate) {
    ModelConfig cfg;
    mutate(cfg);
    try {
      cfg.validate();
    } catch (const Error&) {
      return true;
    }
    return false;
  };
  EXPECT_TRUE(invalid([](ModelConfig& c) { c.heads = 7; }));
  EXPECT_TRUE(invalid([](ModelConfig& c) { c.fc_layers = 4; }));
  EXPECT_TRUE(invalid([](ModelConfig& c) { c.gat_layers = 0; }));
  EXPECT_TRUE(invalid([](ModelConfig& c) { c.dropout = 1.0; }));
  EXPECT_TRUE(invalid([](ModelConfig& c) { c.stages = {{BlockKind::normal, 2}}; }));
  EXPECT_TRUE(invalid([](ModelConfig& c) {
    c.fusion = Fusion::B;
    c.stages = {{BlockKind::reduce, 2}};
  }));
  ModelConfig a;
  a.fusion = Fusion::A;
  a.validate();
  EXPECT_EQ(a.gat_layers, 0u);
}

TEST(Dataset, VocabularyAndTargets) {
  EXPECT_EQ(utf8_symbols("a\xC3\xA9\xE4\xB8\xAD"), (std::vector<std::string>{"a", "\xC3\xA9", "\xE4\xB8\xAD"}));
  const auto fc = build_vocabulary({"b", "a", "b", "ab"}, Decoder::fc);
  EXPECT_EQ(fc, (std::vector<std::string>{"a", "ab", "b"}));
  const auto ctc = build_vocabulary({"ba", "c"}, Decoder::ctc);
  EXPECT_EQ(ctc, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(ctc_target(ctc, "cab"), (LabelSequence{3, 1, 2}));
  EXPECT_THROW(class_index(fc, "z"), Error);
}

TEST(Dataset, StratifiedSplit) {
  const auto corpus = synth_generate(airwrite::testing::shipped_templates(), 100, 7);
  const auto s = split_corpus(corpus, 0.8, 0.1, 7);
  EXPECT_EQ(s.train.size(), 1600u);
  EXPECT_EQ(s.val.size(), 200u);
  EXPECT_EQ(s.test.size(), 200u);
  std::map<std::string, int> val_counts;
  for (const auto& t : s.val) ++val_counts[*t.label];
  for (const auto& [label, n] : val_counts) EXPECT_EQ(n, 10);
  const auto again = split_corpus(corpus, 0.8, 0.1, 7);
  for (std::size_t i = 0; i < s.val.size(); ++i) EXPECT_EQ(s.val[i].points[0].p, again.val[i].points[0].p);
  EXPECT_THROW(split_corpus(corpus, 0.8, 0.3, 7), Error);
}

TEST(Recognize, CandidatesAreRankedAndTruncated) {
  Model m(desk_config(Fusion::D, 3), 2);
  m.set_labels({"x", "y", "z"});
  std::mt19937_64 rng(1);
  Trajectory t = airwrite::testing::random_trajectory(rng, 30, 1);
  auto five = recognize(m, t, 5);
  ASSERT_EQ(five.size(), 3u);
  EXPECT_GE(five[0].prob, five[1].prob);
  EXPECT_GE(five[1].prob, five[2].prob);
  EXPECT_EQ(recognize(m, t, 1).size(), 1u);
  Trajectory tiny;
  tiny.points = {{0, 0, 1}, {1, 1, 1}};
  try {
    recognize(m, tiny, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::too_short);
  }
}
