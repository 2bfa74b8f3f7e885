#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <motenc/eval.hpp>
#include <motenc/train.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace motenc;

namespace {

std::vector<WindowPair> walk_pairs(std::size_t count, std::size_t delta_t,
                                   std::uint64_t seed, const std::string& action = "walk") {
  SeededRng rng(seed);
  MotionRecording rec = normalize_recording(synth_generate(action, 3.0, 30, rng));
  auto pairs = make_window_pairs(rec, delta_t);
  if (pairs.size() > count) pairs.resize(count);
  return pairs;
}

ArchitectureSpec small_ste(std::size_t delta_t = 10) {
  ArchitectureSpec spec;
  spec.kind = ArchKind::ste;
  spec.delta_t = delta_t;
  spec.num_joints = 24;
  spec.outer_width = 32;
  spec.bottleneck_width = 8;
  spec.init_std = 0.5;
  return spec;
}

double param_sq_norm(Network& net) {
  double acc = 0.0;
  for (const auto& p : collect_params(net)) {
    for (double v : p.value->values()) acc += v * v;
  }
  return acc;
}

}  // namespace

TEST_CASE("sgd_momentum_step") {
  SeededRng rng(1);
  SECTION("momentum 0, decay 0 reduces to plain SGD") {
    Tensor param = oracles::random_tensor({3, 4}, rng);
    const Tensor before = param;
    const Tensor grad = oracles::random_tensor({3, 4}, rng);
    std::vector<ParamView> params = {{&param, nullptr, false}};
    OptimizerState state = OptimizerState::for_params(params);
    TrainConfig cfg;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    cfg.learning_rate = 0.05;
    sgd_momentum_step(params, {grad}, state, cfg);
    for (std::size_t i = 0; i < param.size(); ++i) {
      REQUIRE(oracles::rel_err(param[i], before[i] - 0.05 * grad[i]) < 1e-15);
    }
  }
  SECTION("zero gradient, zero decay, zero velocity leaves parameters alone") {
    Tensor param = oracles::random_tensor({5}, rng);
    const Tensor before = param;
    std::vector<ParamView> params = {{&param, nullptr, false}};
    OptimizerState state = OptimizerState::for_params(params);
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    sgd_momentum_step(params, {Tensor({5})}, state, cfg);
    REQUIRE(oracles::max_abs_diff(param, before) == 0.0);
  }
  SECTION("two constant-gradient steps match the closed form") {
    Tensor param = oracles::random_tensor({4}, rng);
    const Tensor before = param;
    const Tensor grad = oracles::random_tensor({4}, rng);
    std::vector<ParamView> params = {{&param, nullptr, false}};
    OptimizerState state = OptimizerState::for_params(params);
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    cfg.learning_rate = 0.01;
    cfg.momentum = 0.9;
    sgd_momentum_step(params, {grad}, state, cfg);
    sgd_momentum_step(params, {grad}, state, cfg);
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double want = before[i] - 0.01 * grad[i] * (2.0 + 0.9);
      REQUIRE(std::abs(param[i] - want) < 1e-12);
    }
  }
  SECTION("weight decay with zero gradients shrinks norms monotonically") {
    Tensor param = oracles::random_tensor({6, 6}, rng);
    std::vector<ParamView> params = {{&param, nullptr, false}};
    OptimizerState state = OptimizerState::for_params(params);
    TrainConfig cfg;  // defaults: lr 0.01, momentum 0.9, decay 0.0005
    double prev = 1e300;
    for (int step = 0; step < 200; ++step) {
      sgd_momentum_step(params, {Tensor({6, 6})}, state, cfg);
      double norm = 0.0;
      for (double v : param.values()) norm += v * v;
      REQUIRE(norm < prev);
      prev = norm;
    }
  }
  SECTION("one step decreases the loss on a fixed batch at small lr") {
    int decreases = 0;
    for (int trial = 0; trial < 100; ++trial) {
      SeededRng trng(100 + trial);
      ArchitectureSpec spec = fixtures::tiny_spec(ArchKind::ste);
      Network net = build_ste(spec, trng);
      auto params = collect_params(net);
      OptimizerState state = OptimizerState::for_params(params);
      TrainConfig cfg;
      cfg.learning_rate = 1e-4;
      cfg.weight_decay = 0.0;
      const Tensor inputs = oracles::random_tensor({4, 3, 4, spec.delta_t}, trng, 0.4);
      const Tensor targets =
          oracles::random_tensor({4, spec.input_size()}, trng, 0.4);
      ForwardTrace trace;
      const Tensor pred = network_forward(net, inputs, &trace);
      LossValue loss = mse_loss(pred, targets);
      const auto grads =
          detail::network_backward(net, trace, std::move(loss.gradient), false);
      sgd_momentum_step(params, grads, state, cfg);
      const double after = mse_loss(network_forward(net, inputs), targets).scalar;
      decreases += after < loss.scalar;
    }
    REQUIRE(decreases >= 99);
  }
}

TEST_CASE("dropout schedule") {
  TrainConfig cfg;
  SECTION("endpoints are exactly 0.1 and 0.3") {
    REQUIRE(dropout_rate_at(0, 50, cfg) == 0.1);
    REQUIRE(dropout_rate_at(49, 50, cfg) == 0.3);
  }
  SECTION("midpoint of 11 epochs is 0.2") {
    REQUIRE(dropout_rate_at(5, 11, cfg) == Catch::Approx(0.2).margin(1e-15));
  }
  SECTION("single-epoch schedules are constant") {
    REQUIRE(dropout_rate_at(0, 1, cfg) == cfg.dropout_start);
  }
  SECTION("epoch out of range is a parameter error") {
    REQUIRE_THROWS_AS(dropout_rate_at(7, 7, cfg), ParamError);
  }
}

TEST_CASE("train_te") {
  SECTION("one epoch at lr 0 leaves parameters unchanged") {
    SeededRng rng(2);
    Network net = build_ste(small_ste(), rng);
    const double norm_before = param_sq_norm(net);
    auto pairs = walk_pairs(6, 10, 3);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 0.0;
    cfg.epochs = 1;
    cfg.batch_size = 6;
    const auto history = train_te(net, pairs, cfg);
    REQUIRE(history.size() == 1);
    REQUIRE(param_sq_norm(net) == norm_before);
  }
  SECTION("overfits ten pairs of one synthetic walk") {
    SeededRng rng(4);
    Network net = build_ste(small_ste(), rng);
    auto pairs = walk_pairs(10, 10, 5);
    REQUIRE(pairs.size() == 10);
    TrainConfig cfg;
    cfg.epochs = 500;
    cfg.batch_size = 10;
    cfg.input_dropout = false;  // measuring pure optimization here
    cfg.seed = 6;
    const auto history = train_te(net, pairs, cfg);
    REQUIRE(history.back() < 0.01 * history.front());
  }
  SECTION("identical seeds give identical loss histories") {
    auto pairs = walk_pairs(8, 10, 7);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 4;
    cfg.seed = 99;
    SeededRng r1(8), r2(8);
    Network a = build_ste(small_ste(), r1);
    Network b = build_ste(small_ste(), r2);
    const auto ha = train_te(a, pairs, cfg);
    const auto hb = train_te(b, pairs, cfg);
    REQUIRE(ha == hb);
    // And identical final parameters, bit for bit.
    auto pa = collect_params(a), pb = collect_params(b);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      REQUIRE(oracles::max_abs_diff(*pa[i].value, *pb[i].value) == 0.0);
    }
  }
  SECTION("empty dataset and classifier input are config errors") {
    SeededRng rng(9);
    Network net = build_ste(small_ste(), rng);
    TrainConfig cfg;
    REQUIRE_THROWS_AS(train_te(net, {}, cfg), ConfigError);
    Network clf = build_classifier(fixtures::tiny_spec(ArchKind::classifier), rng);
    auto pairs = walk_pairs(2, 10, 10);
    REQUIRE_THROWS_AS(train_te(clf, pairs, cfg), ConfigError);
  }
  SECTION("epoch log lines carry loss, dropout and lr") {
    SeededRng rng(11);
    Network net = build_ste(small_ste(), rng);
    auto pairs = walk_pairs(4, 10, 12);
    std::ostringstream log;
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.log = &log;
    train_te(net, pairs, cfg);
    const std::string text = log.str();
    REQUIRE(text.find("epoch=0 loss=") != std::string::npos);
    REQUIRE(text.find("epoch=1 loss=") != std::string::npos);
    REQUIRE(text.find("dropout=0.1") != std::string::npos);
    REQUIRE(text.find("lr=0.01") != std::string::npos);
  }
}

TEST_CASE("train_classifier") {
  SECTION("separates a linearly separable two-class toy set") {
    SeededRng rng(13);
    ArchitectureSpec spec;
    spec.kind = ArchKind::classifier;
    spec.classifier = {4, 50, 20, 2};
    spec.init_std = 0.5;
    spec.init_nonzeros = 4;
    Network clf = build_classifier(spec, rng);
    const std::size_t n = 80;
    Tensor features({n, 4});
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool cls = i % 2 == 1;
      labels[i] = cls;
      for (std::size_t k = 0; k < 4; ++k) {
        features(i, k) = (cls ? 1.0 : -1.0) + 0.25 * rng.normal();
      }
    }
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 20;
    cfg.learning_rate = 0.05;
    cfg.seed = 14;
    train_classifier(clf, features, labels, cfg);
    std::size_t correct = 0;
    const Tensor probs = network_forward(clf, features);
    for (std::size_t i = 0; i < n; ++i) {
      correct += (probs(i, 1) > probs(i, 0)) == (labels[i] == 1);
    }
    REQUIRE(double(correct) / double(n) >= 0.99);
  }
  SECTION("label/feature mismatch is a config error") {
    SeededRng rng(15);
    Network clf = build_classifier(fixtures::tiny_spec(ArchKind::classifier), rng);
    TrainConfig cfg;
    REQUIRE_THROWS_AS(train_classifier(clf, Tensor({4, 6}), {0, 1}, cfg), ConfigError);
  }
  SECTION("same seed gives identical final weights") {
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 10;
    cfg.seed = 16;
    Tensor features({30, 6});
    std::vector<std::size_t> labels(30);
    SeededRng drng(17);
    for (double& v : features.values()) v = drng.normal();
    for (auto& l : labels) l = drng.uniform_below(3);
    SeededRng r1(18), r2(18);
    Network a = build_classifier(fixtures::tiny_spec(ArchKind::classifier), r1);
    Network b = build_classifier(fixtures::tiny_spec(ArchKind::classifier), r2);
    train_classifier(a, features, labels, cfg);
    train_classifier(b, features, labels, cfg);
    auto pa = collect_params(a), pb = collect_params(b);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      REQUIRE(oracles::max_abs_diff(*pa[i].value, *pb[i].value) == 0.0);
    }
  }
  SECTION("classifier gradient path survives a finite-difference audit") {
    // End-to-end check through both sigmoid layers and the fused softmax.
    SeededRng rng(19);
    ArchitectureSpec spec;
    spec.kind = ArchKind::classifier;
    spec.classifier = {3, 4, 3, 2};
    spec.init_std = 0.7;
    spec.init_nonzeros = 3;
    Network clf = build_classifier(spec, rng);
    Tensor features = oracles::random_tensor({5, 3}, rng);
    const std::vector<std::size_t> labels = {0, 1, 1, 0, 1};
    ForwardTrace trace;
    network_forward(clf, features, &trace);
    const auto& last = std::get<DenseCache>(trace.layers.back());
    LossValue loss = softmax_cross_entropy(last.preact, labels);
    const auto grads =
        detail::network_backward(clf, trace, std::move(loss.gradient), true);
    auto probe = [&] {
      ForwardTrace t2;
      network_forward(clf, features, &t2);
      return softmax_cross_entropy(std::get<DenseCache>(t2.layers.back()).preact, labels)
          .scalar;
    };
    auto params = collect_params(clf);
    for (std::size_t i = 0; i < params.size(); ++i) {
      REQUIRE(oracles::max_rel_err(grads[i],
                                   oracles::finite_diff(*params[i].value, probe)) < 1e-6);
    }
  }
}

TEST_CASE("pretrain_layerwise") {
  auto pairs = walk_pairs(12, 10, 21);
  SECTION("zero pretrain epochs is a no-op") {
    SeededRng rng(22);
    Network net = build_ste(small_ste(), rng);
    const double before = param_sq_norm(net);
    TrainConfig cfg;
    cfg.pretrain_epochs = 0;
    pretrain_layerwise(net, pairs, cfg);
    REQUIRE(param_sq_norm(net) == before);
  }
  SECTION("weight shapes are unchanged and the classifier is rejected") {
    SeededRng rng(23);
    Network net = build_ste(small_ste(), rng);
    std::vector<Shape> shapes;
    for (const auto& p : collect_params(net)) shapes.push_back(p.value->shape());
    TrainConfig cfg;
    cfg.pretrain_epochs = 2;
    cfg.batch_size = 12;
    cfg.input_dropout = false;
    pretrain_layerwise(net, pairs, cfg);
    auto params = collect_params(net);
    for (std::size_t i = 0; i < params.size(); ++i) {
      REQUIRE(params[i].value->shape() == shapes[i]);
    }
    REQUIRE(net.meta.note.find("pretraining") != std::string::npos);

    Network clf = build_classifier(fixtures::tiny_spec(ArchKind::classifier), rng);
    REQUIRE_THROWS_AS(pretrain_layerwise(clf, pairs, cfg), ConfigError);
  }
  SECTION("pretraining lowers the initial joint-training loss (median of 5 seeds)") {
    int better = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SeededRng r1(40 + seed), r2(40 + seed);
      Network cold = build_ste(small_ste(), r1);
      Network warm = build_ste(small_ste(), r2);
      TrainConfig pre;
      pre.pretrain_epochs = 30;
      pre.batch_size = 12;
      pre.input_dropout = false;
      pre.seed = seed;
      pretrain_layerwise(warm, pairs, pre);
      // Epoch-0 loss probe: lr 0 so the loss is measured, nothing moves.
      TrainConfig probe;
      probe.epochs = 1;
      probe.batch_size = 12;
      probe.learning_rate = 0.0;
      probe.weight_decay = 0.0;
      probe.input_dropout = false;
      probe.seed = seed;
      const double cold0 = train_te(cold, pairs, probe).front();
      const double warm0 = train_te(warm, pairs, probe).front();
      better += warm0 <= cold0;
    }
    REQUIRE(better >= 3);
  }
}

TEST_CASE("finetune") {
  auto pairs = walk_pairs(8, 10, 31);
  SECTION("lr zero means no update, and provenance is recorded") {
    SeededRng rng(32);
    Network net = build_ste(small_ste(), rng);
    const double before = param_sq_norm(net);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 0.0;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    finetune(net, pairs, cfg, "walk");
    REQUIRE(param_sq_norm(net) == before);
    REQUIRE(net.meta.finetuned);
    REQUIRE(net.meta.note.find("walk") != std::string::npos);
  }
  SECTION("fine-tuning on an action lowers held-out same-action error (median of 3 seeds)") {
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      // Generic model: walk + wave; fine-tune on wave; evaluate on fresh wave.
      auto generic_pairs = walk_pairs(10, 10, 100 + seed, "walk");
      auto wave_train = walk_pairs(10, 10, 200 + seed, "wave");
      generic_pairs.insert(generic_pairs.end(), wave_train.begin(), wave_train.end());

      SeededRng rng(300 + seed);
      Network net = build_ste(small_ste(), rng);
      TrainConfig cfg;
      cfg.epochs = 150;
      cfg.batch_size = 20;
      cfg.input_dropout = false;
      cfg.seed = seed;
      train_te(net, generic_pairs, cfg);

      SeededRng erng(400 + seed);
      const MotionRecording held_out =
          normalize_recording(synth_generate("wave", 3.0, 30, erng));
      const std::vector<MotionRecording> eval_set = {held_out};
      const auto before = evaluate_horizons(net_predictor(net), eval_set, {100, 200}, 10,
                                            "generic", "wave");
      auto finetune_pairs = walk_pairs(10, 10, 500 + seed, "wave");
      TrainConfig ft = cfg;
      ft.epochs = 100;
      finetune(net, finetune_pairs, ft, "wave");
      const auto after = evaluate_horizons(net_predictor(net), eval_set, {100, 200}, 10,
                                           "finetuned", "wave");
      improved += after.mean_over_horizons() < before.mean_over_horizons();
    }
    REQUIRE(improved >= 2);
  }
}
