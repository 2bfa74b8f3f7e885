#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include <motenc/eval.hpp>
#include <motenc/train.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace motenc;

namespace {

// Perfect-knowledge predictor: looks each input window up in a pair list and
// returns the true target. Bit-equality works because evaluation rebuilds
// the identical windows from the recording.
Predictor oracle_predictor(std::vector<WindowPair> pairs) {
  return [pairs = std::move(pairs)](const Tensor& windows) {
    const std::size_t batch = windows.dim(0);
    const std::size_t stride = windows.size() / batch;
    Tensor out({batch, stride});
    for (std::size_t b = 0; b < batch; ++b) {
      const double* query = windows.data() + b * stride;
      bool found = false;
      for (const auto& p : pairs) {
        if (std::memcmp(query, p.input.data(), stride * sizeof(double)) == 0) {
          std::copy(p.target.data(), p.target.data() + stride, out.data() + b * stride);
          found = true;
          break;
        }
      }
      if (!found) throw std::logic_error("oracle predictor: unknown window");
    }
    return out;
  };
}

MotionRecording constant_recording(std::size_t frames, double value) {
  MotionRecording rec;
  rec.schema = fixtures::tiny_schema();
  rec.fps = 60;
  rec.frames = Tensor::full({frames, 3, 4}, value);
  rec.subject = "const";
  rec.trial = "t0";
  return rec;
}

}  // namespace

TEST_CASE("frame_error") {
  SECTION("zero for identical frames") {
    SeededRng rng(1);
    const Tensor f = oracles::random_tensor({3, 24}, rng);
    REQUIRE(frame_error(f, f, 24) == 0.0);
  }
  SECTION("3-4-5 single-joint offset gives exactly 5/24") {
    Tensor pred({3, 24}), gt({3, 24});
    pred(0, 7) = 3.0;
    pred(1, 7) = 4.0;
    REQUIRE(frame_error(pred, gt, 24) == 5.0 / 24.0);
  }
  SECTION("matches the explicit-sum oracle") {
    SeededRng rng(2);
    const Tensor pred = oracles::random_tensor({3, 24}, rng);
    const Tensor gt = oracles::random_tensor({3, 24}, rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < 72; ++i) {
      acc += (pred[i] - gt[i]) * (pred[i] - gt[i]);
    }
    const double want = std::sqrt(acc) / 24.0;
    REQUIRE(oracles::rel_err(frame_error(pred, gt, 24), want) < 1e-12);
  }
  SECTION("metric properties on random triples") {
    SeededRng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor a = oracles::random_tensor({3, 4}, rng);
      const Tensor b = oracles::random_tensor({3, 4}, rng);
      const Tensor c = oracles::random_tensor({3, 4}, rng);
      REQUIRE(frame_error(a, b, 4) == frame_error(b, a, 4));
      REQUIRE(frame_error(a, b, 4) >= 0.0);
      REQUIRE(frame_error(a, c, 4) <=
              frame_error(a, b, 4) + frame_error(b, c, 4) + 1e-15);
    }
  }
  SECTION("shape mismatch is rejected") {
    REQUIRE_THROWS_AS(frame_error(Tensor({3, 4}), Tensor({3, 5}), 4), ShapeError);
  }
}

TEST_CASE("horizon_frame_index") {
  SECTION("exact and rounded cases at 60 fps") {
    REQUIRE(horizon_frame_index(1000, 60, 100) == 60);
    REQUIRE(horizon_frame_index(80, 60, 100) == 5);  // 4.8 rounds up
    REQUIRE(horizon_frame_index(1600, 60, 100) == 96);
  }
  SECTION("ties round to even") {
    REQUIRE(horizon_frame_index(125, 60, 100) == 8);   // 7.5 -> 8
    REQUIRE(horizon_frame_index(375, 60, 100) == 22);  // 22.5 -> 22
  }
  SECTION("horizons beyond the window are rejected") {
    REQUIRE_THROWS_AS(horizon_frame_index(1700, 60, 100), ParamError);
    REQUIRE_THROWS_AS(horizon_frame_index(-5, 60, 100), ParamError);
  }
}

TEST_CASE("persistence_baseline") {
  SECTION("constant input reproduces itself, frames all identical") {
    const Tensor w = Tensor::full({3, 4, 6}, 0.25);
    const Tensor out = persistence_baseline(w);
    REQUIRE(oracles::max_abs_diff(out, w) == 0.0);
    SeededRng rng(4);
    const Tensor r = oracles::random_tensor({3, 4, 6}, rng);
    const Tensor pr = persistence_baseline(r);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t t = 0; t < 6; ++t) {
          REQUIRE(pr(c, j, t) == r(c, j, 5));
        }
      }
    }
  }
  SECTION("error grows linearly against a linearly moving joint") {
    // Joint 0 moves in x by v per frame; everything else is static.
    const double v = 0.01;
    MotionRecording rec = constant_recording(40, 0.0);
    for (std::size_t t = 0; t < 40; ++t) rec.frames(t, 0, 0) = v * double(t);
    const std::vector<double> horizons = {50, 100, 150};  // frames 3, 6, 9
    const auto report = evaluate_horizons(persistence_predictor(), {rec}, horizons, 10,
                                          "persistence", "line");
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      const double frames = double(report.horizons[h].frame_index);
      REQUIRE(std::abs(report.mean_errors[h] - frames * v / 4.0) < 1e-12);
    }
  }
}

TEST_CASE("evaluate_horizons") {
  SECTION("perfect oracle model scores zero everywhere") {
    SeededRng rng(5);
    MotionRecording rec = fixtures::random_recording(30, rng, fixtures::tiny_schema());
    auto pairs = make_window_pairs(rec, 8);
    const auto report = evaluate_horizons(oracle_predictor(std::move(pairs)), {rec},
                                          {50, 100}, 8, "oracle", "random");
    for (double e : report.mean_errors) REQUIRE(e == 0.0);
  }
  SECTION("persistence on a constant recording scores zero") {
    const MotionRecording rec = constant_recording(30, 0.4);
    const auto report = evaluate_horizons(persistence_predictor(), {rec}, {50, 100}, 8,
                                          "persistence", "const");
    REQUIRE(report.sample_count == 30 - 16 + 1);
    for (double e : report.mean_errors) REQUIRE(e == 0.0);
  }
  SECTION("persistence error strictly increases with horizon on a walk") {
    SeededRng rng(6);
    const MotionRecording rec =
        normalize_recording(synth_generate("walk", 2.0, 60, rng));
    const auto report = evaluate_horizons(persistence_predictor(), {rec},
                                          {50, 100, 200, 300}, 25, "persistence", "walk");
    for (std::size_t h = 1; h < report.mean_errors.size(); ++h) {
      REQUIRE(report.mean_errors[h] > report.mean_errors[h - 1]);
    }
  }
  SECTION("report mean equals a brute-force recomputation") {
    SeededRng rng(7);
    ArchitectureSpec spec = fixtures::tiny_spec(ArchKind::ste, 6);
    Network net = build_ste(spec, rng);
    std::vector<MotionRecording> recs;
    for (int r = 0; r < 3; ++r) {
      recs.push_back(fixtures::random_recording(20 + 3 * r, rng, fixtures::tiny_schema()));
    }
    const std::vector<double> horizons = {50, 100};
    const auto report =
        evaluate_horizons(net_predictor(net), recs, horizons, 6, "net", "rand");

    // Brute force: materialize every (window, horizon) error, then average.
    std::vector<std::vector<double>> all_errors(horizons.size());
    for (const auto& rec : recs) {
      for (const auto& pair : make_window_pairs(rec, 6)) {
        const Tensor pred = predict_window(net, pair.input);
        for (std::size_t h = 0; h < horizons.size(); ++h) {
          const std::size_t k = horizon_frame_index(horizons[h], rec.fps, 6);
          Tensor pf({3, 4}), gf({3, 4});
          for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t j = 0; j < 4; ++j) {
              pf(c, j) = pred(c, j, k - 1);
              gf(c, j) = pair.target(c, j, k - 1);
            }
          }
          all_errors[h].push_back(frame_error(pf, gf, 4));
        }
      }
    }
    REQUIRE(report.sample_count == all_errors[0].size());
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      double acc = 0.0;
      for (double e : all_errors[h]) acc += e;
      REQUIRE(std::abs(report.mean_errors[h] - acc / double(all_errors[h].size())) <
              1e-12);
    }
  }
  SECTION("threaded evaluation reproduces the single-thread report") {
    SeededRng rng(8);
    std::vector<MotionRecording> recs;
    for (int r = 0; r < 5; ++r) {
      recs.push_back(fixtures::random_recording(25, rng, fixtures::tiny_schema()));
    }
    const auto one = evaluate_horizons(persistence_predictor(), recs, {50, 100}, 8,
                                       "p", "set", "", 1);
    const auto four = evaluate_horizons(persistence_predictor(), recs, {50, 100}, 8,
                                        "p", "set", "", 4);
    REQUIRE(one.mean_errors == four.mean_errors);
  }
  SECTION("mixed frame rates and empty window sets are evaluation errors") {
    MotionRecording a = constant_recording(30, 0.1);
    MotionRecording b = constant_recording(30, 0.1);
    b.fps = 30;
    REQUIRE_THROWS_AS(
        evaluate_horizons(persistence_predictor(), {a, b}, {50}, 8, "p", "s"),
        EvalError);
    const MotionRecording tiny = constant_recording(10, 0.1);
    REQUIRE_THROWS_AS(
        evaluate_horizons(persistence_predictor(), {tiny}, {50}, 8, "p", "s"),
        EvalError);
  }
}

TEST_CASE("evaluate_missing_limb") {
  SECTION("unknown limb is a parameter error") {
    const MotionRecording rec = constant_recording(30, 0.2);
    REQUIRE_THROWS_AS(
        evaluate_missing_limb(persistence_predictor(), {rec}, "tail", {50}, 8, "p", "s"),
        ParamError);
  }
  SECTION("masking a moving limb raises the persistence error") {
    SeededRng rng(9);
    const MotionRecording rec =
        normalize_recording(synth_generate("wave", 3.0, 60, rng));
    const std::vector<double> horizons = {50, 100};
    const auto plain =
        evaluate_horizons(persistence_predictor(), {rec}, horizons, 20, "p", "wave");
    const auto masked = evaluate_missing_limb(persistence_predictor(), {rec}, "left_arm",
                                              horizons, 20, "p", "wave");
    REQUIRE(masked.mean_over_horizons() > plain.mean_over_horizons());
    REQUIRE(masked.set_id.find("masked:left_arm") != std::string::npos);
  }
}

TEST_CASE("aggregate_distributions") {
  SECTION("unanimous steps pick that class") {
    Tensor probs({3, 2});
    for (std::size_t i = 0; i < 3; ++i) {
      probs(i, 0) = 0.8;
      probs(i, 1) = 0.2;
    }
    REQUIRE(aggregate_distributions(probs, Aggregation::mean_softmax).class_index == 0);
    REQUIRE(aggregate_distributions(probs, Aggregation::majority_vote).class_index == 0);
  }
  SECTION("two-step mean of [0.6,0.4] and [0.2,0.8] picks the second class") {
    const Tensor probs = Tensor::matrix({{0.6, 0.4}, {0.2, 0.8}});
    const auto result = aggregate_distributions(probs, Aggregation::mean_softmax);
    REQUIRE(result.class_index == 1);
    REQUIRE(result.mean_distribution(0) == Catch::Approx(0.4).margin(1e-15));
    REQUIRE(result.mean_distribution(1) == Catch::Approx(0.6).margin(1e-15));
  }
  SECTION("the mean rule is invariant to step order") {
    SeededRng rng(10);
    Tensor probs({20, 4});
    for (std::size_t i = 0; i < 20; ++i) {
      double norm = 0.0;
      for (std::size_t m = 0; m < 4; ++m) {
        probs(i, m) = rng.uniform() + 1e-3;
        norm += probs(i, m);
      }
      for (std::size_t m = 0; m < 4; ++m) probs(i, m) /= norm;
    }
    const auto base = aggregate_distributions(probs, Aggregation::mean_softmax);
    auto rows = rng.permutation(20);
    Tensor shuffled({20, 4});
    for (std::size_t i = 0; i < 20; ++i) {
      for (std::size_t m = 0; m < 4; ++m) shuffled(i, m) = probs(rows[i], m);
    }
    const auto moved = aggregate_distributions(shuffled, Aggregation::mean_softmax);
    REQUIRE(moved.class_index == base.class_index);
    REQUIRE(oracles::max_abs_diff(moved.mean_distribution, base.mean_distribution) <
            1e-12);
  }
}

TEST_CASE("classify_sequence") {
  SeededRng rng(11);
  ArchitectureSpec te_spec = fixtures::tiny_spec(ArchKind::ste, 6);
  Network te = build_ste(te_spec, rng);
  ArchitectureSpec clf_spec = fixtures::tiny_spec(ArchKind::classifier);
  clf_spec.classifier.input = te_spec.bottleneck_width;
  Network clf = build_classifier(clf_spec, rng);

  SECTION("constant classifier output wins by its bias") {
    for (auto& p : collect_params(clf)) p.value->fill(0.0);
    std::get<DenseLayer>(clf.layers.back().layer).bias(2) = 3.0;
    const MotionRecording rec = constant_recording(30, 0.3);
    const auto result = classify_sequence(clf, te, rec, "middle", 8.0);
    REQUIRE(result.class_index == 2);
    REQUIRE(result.steps == 30 - 6 + 1);  // whole recording is inside 8 s
  }
  SECTION("too-short recordings are evaluation errors") {
    const MotionRecording rec = constant_recording(5, 0.3);
    REQUIRE_THROWS_AS(classify_sequence(clf, te, rec, "middle"), EvalError);
  }
  SECTION("only the leading window_seconds are classified") {
    const MotionRecording rec = constant_recording(120, 0.3);
    const auto result = classify_sequence(clf, te, rec, "middle", 1.0);
    REQUIRE(result.steps == 60 - 6 + 1);  // 1 s at 60 fps
  }
}

TEST_CASE("spike_triggered_average") {
  SeededRng rng(12);
  ArchitectureSpec spec = fixtures::tiny_spec(ArchKind::ste, 6);
  Network net = build_ste(spec, rng);

  std::vector<Tensor> windows;
  for (int i = 0; i < 12; ++i) {
    windows.push_back(oracles::random_tensor({3, 4, 6}, rng, 0.4));
  }

  SECTION("constant activity reduces to the plain window mean") {
    Network constant = net;
    // Zero weights, bias at sigmoid^-1(0.9): every window scores 0.9.
    auto& lower = std::get<DenseLayer>(constant.layers[0].layer);
    lower.weights.fill(0.0);
    lower.bias.fill(std::log(0.9 / 0.1));
    const StaResult sta = spike_triggered_average(constant, windows, "enc_lower", 3);
    REQUIRE(!sta.is_empty());
    REQUIRE(sta.contributing == windows.size());
    Tensor mean({3, 4, 6});
    for (const auto& w : windows) mean += w;
    mean *= 1.0 / double(windows.size());
    REQUIRE(oracles::max_abs_diff(sta.average_window, mean) < 1e-12);
  }
  SECTION("no window above threshold gives an empty result, not NaN") {
    Network quiet = net;
    auto& lower = std::get<DenseLayer>(quiet.layers[0].layer);
    lower.weights.fill(0.0);
    lower.bias.fill(0.0);  // sigmoid(0) = 0.5 < 0.8
    const StaResult sta = spike_triggered_average(quiet, windows, "enc_lower", 0);
    REQUIRE(sta.is_empty());
    REQUIRE(sta.contributing == 0);
  }
  SECTION("weighted mean uses the activities as weights") {
    const std::size_t unit = 1;
    const StaResult sta = spike_triggered_average(net, windows, "enc_lower", unit, 0.0);
    // Recompute from independently extracted activities.
    double weight_sum = 0.0;
    Tensor acc({3, 4, 6});
    for (const auto& w : windows) {
      const Tensor feats = extract_features(net, w, "lower");
      const double a = feats(unit);
      weight_sum += a;
      for (std::size_t k = 0; k < w.size(); ++k) acc[k] += a * w[k];
    }
    acc *= 1.0 / weight_sum;
    REQUIRE(sta.contributing == windows.size());
    REQUIRE(oracles::max_abs_diff(sta.average_window, acc) < 1e-12);
  }
  SECTION("two windows with activities 0.9 and 0.81 use weights 0.9/1.71, 0.81/1.71") {
    // The weighting arithmetic on the hand-computed example.
    const Tensor& w1 = windows[0];
    const Tensor& w2 = windows[1];
    Tensor expected({3, 4, 6});
    for (std::size_t k = 0; k < expected.size(); ++k) {
      expected[k] = (0.9 / 1.71) * w1[k] + (0.81 / 1.71) * w2[k];
    }
    Tensor direct({3, 4, 6});
    for (std::size_t k = 0; k < direct.size(); ++k) {
      direct[k] = (0.9 * w1[k] + 0.81 * w2[k]) / (0.9 + 0.81);
    }
    REQUIRE(oracles::max_abs_diff(expected, direct) < 1e-12);
  }
  SECTION("STA lies in the convex hull of contributing windows") {
    const StaResult sta = spike_triggered_average(net, windows, "enc_lower", 2, 0.0);
    REQUIRE(!sta.is_empty());
    for (std::size_t k = 0; k < sta.average_window.size(); ++k) {
      double lo = 1e300, hi = -1e300;
      for (const auto& w : windows) {
        lo = std::min(lo, w[k]);
        hi = std::max(hi, w[k]);
      }
      REQUIRE(sta.average_window[k] >= lo - 1e-12);
      REQUIRE(sta.average_window[k] <= hi + 1e-12);
    }
  }
  SECTION("non-sigmoid layers and bad units are parameter errors") {
    REQUIRE_THROWS_AS(spike_triggered_average(net, windows, "bottleneck", 0), ParamError);
    REQUIRE_THROWS_AS(spike_triggered_average(net, windows, "nope", 0), ParamError);
    REQUIRE_THROWS_AS(spike_triggered_average(net, windows, "enc_lower", 10000),
                      ParamError);
  }
}

TEST_CASE("principal_components and latent_trajectory") {
  SECTION("constant features give a zero trajectory") {
    SeededRng rng(13);
    ArchitectureSpec spec = fixtures::tiny_spec(ArchKind::ste, 6);
    Network net = build_ste(spec, rng);
    for (auto& p : collect_params(net)) p.value->fill(0.0);
    const MotionRecording rec = constant_recording(30, 0.2);
    const TrajectoryResult result = latent_trajectory(net, rec, "middle", 3);
    REQUIRE(result.reduced);
    REQUIRE(result.components_used == 0);
    for (double v : result.trajectory.values()) REQUIRE(v == 0.0);
  }
  SECTION("a perfect line is captured by one component") {
    Tensor rows({50, 2});
    for (std::size_t i = 0; i < 50; ++i) {
      const double t = double(i) * 0.1;
      rows(i, 0) = 2.0 * t;
      rows(i, 1) = -1.0 * t;
    }
    const PcaResult pca = principal_components(rows, 2);
    REQUIRE(pca.eigenvalues[0] > 1e-6);
    REQUIRE(std::abs(pca.eigenvalues[1]) < 1e-12 * pca.eigenvalues[0]);
    REQUIRE(pca.reduced);  // rank 1 < 2 requested
    REQUIRE(pca.components_used == 1);
  }
  SECTION("reconstruction error equals the sum of discarded eigenvalues") {
    SeededRng rng(14);
    Tensor rows({60, 6});
    for (double& v : rows.values()) v = rng.normal();
    const std::size_t k = 2;
    const PcaResult pca = principal_components(rows, k);
    const Tensor projected = matmul(pca.centered, pca.basis);
    const Tensor reconstructed = matmul(projected, transpose(pca.basis));
    double err = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double d = pca.centered[i] - reconstructed[i];
      err += d * d;
    }
    err /= double(rows.dim(0));
    double discarded = 0.0;
    for (std::size_t i = k; i < pca.eigenvalues.size(); ++i) {
      discarded += pca.eigenvalues[i];
    }
    REQUIRE(oracles::rel_err(err, discarded, 1e-9) < 1e-9);
  }
  SECTION("component signs put the largest loading positive") {
    SeededRng rng(15);
    Tensor rows({40, 5});
    for (double& v : rows.values()) v = rng.normal();
    const PcaResult pca = principal_components(rows, 3);
    for (std::size_t c = 0; c < pca.components_used; ++c) {
      double best = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        if (std::abs(pca.basis(j, c)) > std::abs(best)) best = pca.basis(j, c);
      }
      REQUIRE(best > 0.0);
    }
  }
  SECTION("too few windows is an evaluation error") {
    SeededRng rng(16);
    ArchitectureSpec spec = fixtures::tiny_spec(ArchKind::ste, 6);
    Network net = build_ste(spec, rng);
    const MotionRecording rec = constant_recording(7, 0.2);  // only 2 windows
    REQUIRE_THROWS_AS(latent_trajectory(net, rec, "middle", 3), EvalError);
  }
}

TEST_CASE("report serialization") {
  HorizonReport report;
  report.model_id = "hte";
  report.set_id = "synthetic";
  report.fps = 60;
  report.horizons = {{80, 5}, {160, 10}};
  report.mean_errors = {0.125, 0.25};
  report.sample_count = 42;
  SECTION("text table carries one horizon per column") {
    const std::string table = horizon_table(report, {"seed=7"});
    REQUIRE(table.find("# seed=7") != std::string::npos);
    REQUIRE(table.find("80ms") != std::string::npos);
    REQUIRE(table.find("160ms") != std::string::npos);
    REQUIRE(table.find("hte") != std::string::npos);
    REQUIRE(table.find("0.1250") != std::string::npos);
  }
  SECTION("delimited format round-trips the numbers") {
    const std::string csv = horizon_csv(report);
    REQUIRE(csv.find("horizon_ms,frame_idx,mean_error,n") != std::string::npos);
    REQUIRE(csv.find("80,5,0.125,42") != std::string::npos);
    REQUIRE(csv.find("160,10,0.25,42") != std::string::npos);
  }
  SECTION("confusion table reports per-class and overall rates") {
    ConfusionMatrix m;
    m.class_names = {"walk", "wave"};
    m.counts = Tensor::matrix({{9, 1}, {2, 8}});
    REQUIRE(m.rate() == Catch::Approx(0.85));
    const std::string table = confusion_table(m);
    REQUIRE(table.find("walk") != std::string::npos);
    REQUIRE(table.find("classification_rate=0.85") != std::string::npos);
  }
  SECTION("trajectory export labels the method substitution") {
    TrajectoryResult t;
    t.trajectory = Tensor::matrix({{1.0, 2.0}, {3.0, 4.0}});
    t.components_used = 2;
    t.eigenvalues = {2.0, 1.0};
    const std::string csv = trajectory_csv(t);
    REQUIRE(csv.find("method=pca") != std::string::npos);
    REQUIRE(csv.find("substitute") != std::string::npos);
    REQUIRE(csv.find("step,comp1,comp2") != std::string::npos);
    REQUIRE(csv.find("0,1,2") != std::string::npos);
  }
}
