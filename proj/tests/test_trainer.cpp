#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pcl/errors.hpp"
#include "pcl/trainer.hpp"
#include "test_util.hpp"

using namespace pcl;

namespace {

RunConfig tiny_run(MethodKind kind) {
    RunConfig cfg;
    cfg.method.kind = kind;
    cfg.stream.n_tasks = 2;
    cfg.stream.classes_per_task = 2;
    cfg.stream.samples_per_class = 50;
    cfg.stream.feature_dim = 4;
    cfg.stream.batch_size = 16;
    cfg.hidden = {16};
    cfg.lr = 0.05;
    cfg.buffer_capacity = 32;
    cfg.buffer_batch = 8;
    cfg.lipschitz_pairs = 200;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("run: sgd on a one-task stream equals a hand-rolled training loop") {
    RunConfig cfg = tiny_run(MethodKind::Sgd);
    cfg.stream.n_tasks = 1;
    cfg.seed = 17;

    DenseNetwork final_net;
    StepObserver grab = [&](int, const DenseNetwork& net) { final_net = net; };
    const RunRecord rec = run(cfg, &grab);

    // Oracle: same stream, same init, plain mini-batch loop.
    StreamConfig sc = cfg.stream;
    sc.seed = cfg.seed;
    const TaskStream stream = make_stream(sc);
    Rng net_rng = trainer_root(cfg.seed).fork(kNetStream);
    DenseNetwork net = make_mlp({4, 16, 2}, net_rng);
    for (const auto& mb : stream.tasks[0].batches) {
        ForwardCache cache;
        const Matrix logits = forward(net, mb.x, &cache);
        const auto ce = soft_cross_entropy(logits, mb.y);
        const auto back = backward(net, cache, ce.grad_logits);
        sgd_step(net, back.grads, cfg.lr);
    }
    CHECK(max_param_distance(net, final_net) == 0.0);
    CHECK(rec.acc_final ==
          doctest::Approx(accuracy(net, stream.tasks[0].eval_x, stream.tasks[0].eval_y))
              .epsilon(1e-15));
}

TEST_CASE("run: identical config and seed give bit-identical records") {
    const RunConfig cfg = tiny_run(MethodKind::Pcl);
    const RunRecord a = run(cfg);
    const RunRecord b = run(cfg);
    CHECK(a.acc_final == b.acc_final);
    CHECK(a.aaa == b.aaa);
    CHECK(a.loss_trace == b.loss_trace);
    REQUIRE(a.checkpoints.size() == b.checkpoints.size());
    for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
        CHECK(a.checkpoints[i].per_group_acc == b.checkpoints[i].per_group_acc);
        CHECK(a.checkpoints[i].per_task_eval_loss == b.checkpoints[i].per_task_eval_loss);
        CHECK(a.checkpoints[i].buffer_loss_max == b.checkpoints[i].buffer_loss_max);
    }
}

// The ER degenerate case: sigma=0, k=1 self-paired PCL doubles the loss, so
// its trajectory must track ER run at twice the learning rate.
TEST_CASE("run: degenerate PCL reproduces ER with scaled learning rate") {
    RunConfig pcl_cfg = tiny_run(MethodKind::Pcl);
    pcl_cfg.method.pcl.bridge = BridgeSpec{1, 0.0, 0.0, 1.0};
    pcl_cfg.method.pcl.pairing = PairingStrategy::Identity;
    pcl_cfg.method.pcl.include_endpoints = true;
    pcl_cfg.lr = 0.03;

    RunConfig er_cfg = pcl_cfg;
    er_cfg.method.kind = MethodKind::Er;
    er_cfg.lr = 0.03 * 2.0;  // (1 + dt) with dt = T/k = 1

    std::vector<DenseNetwork> pcl_trace, er_trace;
    StepObserver grab_pcl = [&](int, const DenseNetwork& n) { pcl_trace.push_back(n); };
    StepObserver grab_er = [&](int, const DenseNetwork& n) { er_trace.push_back(n); };
    const RunRecord pr = run(pcl_cfg, &grab_pcl);
    const RunRecord er = run(er_cfg, &grab_er);

    REQUIRE(pcl_trace.size() == er_trace.size());
    double worst = 0.0;
    for (std::size_t s = 0; s < pcl_trace.size(); ++s)
        worst = std::max(worst, max_param_distance(pcl_trace[s], er_trace[s]));
    CHECK(worst <= 1e-10);

    // Loss relation: pcl loss = 2 * er loss at every step.
    REQUIRE(pr.loss_trace.size() == er.loss_trace.size());
    for (std::size_t s = 0; s < pr.loss_trace.size(); ++s)
        CHECK(pr.loss_trace[s] == doctest::Approx(2.0 * er.loss_trace[s]).epsilon(1e-9));
}

TEST_CASE("run: buffer capacity respected, sgd never touches the buffer") {
    RunConfig cfg = tiny_run(MethodKind::Er);
    cfg.buffer_capacity = 20;
    const RunRecord rec = run(cfg);
    for (const auto& snap : rec.buffer_snapshots) CHECK(snap.size() <= 20);
    CHECK(rec.buffer_snapshots.back().size() == 20);

    const RunRecord sgd_rec = run(tiny_run(MethodKind::Sgd));
    for (const auto& snap : sgd_rec.buffer_snapshots) CHECK(snap.empty());
}

TEST_CASE("run: checkpoint j only reports class groups seen so far") {
    const RunRecord rec = run(tiny_run(MethodKind::Pcl));
    REQUIRE(rec.checkpoints.size() == 2);
    CHECK(rec.checkpoints[0].per_group_acc.size() == 1);
    CHECK(rec.checkpoints[1].per_group_acc.size() == 2);
    CHECK(rec.n_tasks == 2);
    // AAA is the mean of the per-checkpoint pooled accuracies.
    CHECK(rec.aaa ==
          doctest::Approx(0.5 * (rec.checkpoints[0].aa + rec.checkpoints[1].aa)).epsilon(1e-12));
    CHECK(rec.acc_final == rec.checkpoints[1].aa);
}

TEST_CASE("run: absurd learning rate diverges with a diagnostic, not a crash") {
    RunConfig cfg = tiny_run(MethodKind::Sgd);
    cfg.lr = 1e300;  // overflow within a couple of steps
    const RunRecord rec = run(cfg);
    CHECK(rec.diverged);
    CHECK(!rec.diagnostic.empty());
}

TEST_CASE("run: loss filters steer what the buffer keeps") {
    RunConfig base = tiny_run(MethodKind::Er);
    base.buffer_capacity = 200;  // large enough that nothing is evicted

    RunConfig maxed = base;
    maxed.buffer_filter = BufferFilter::MaxLoss;
    const RunRecord rec_max = run(maxed);
    const RunRecord rec_all = run(base);
    // One admission per step under MaxLoss vs a full batch under None.
    CHECK(rec_max.buffer_snapshots.back().size() ==
          static_cast<std::size_t>(rec_max.steps));
    CHECK(rec_all.buffer_snapshots.back().size() > rec_max.buffer_snapshots.back().size());
}

TEST_CASE("accuracy: constant-logits net sits at chance level") {
    DenseNetwork net;
    DenseLayer layer;
    layer.weights = Matrix(10, 4);  // all zeros: every logit identical
    layer.bias.assign(10, 0.0);
    layer.activation = Activation::Identity;
    net.layers.push_back(layer);

    StreamConfig sc;
    sc.n_tasks = 5;
    sc.classes_per_task = 2;
    sc.samples_per_class = 50;
    sc.feature_dim = 4;
    sc.seed = 23;
    const TaskStream stream = make_stream(sc);
    Matrix all_x, all_y;
    for (const auto& t : stream.tasks) {
        all_x = vstack(all_x, t.eval_x);
        all_y = vstack(all_y, t.eval_y);
    }
    // Ties resolve to class 0, which holds exactly 1/10 of a balanced set.
    CHECK(accuracy(net, all_x, all_y) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("accuracy: matches a per-sample brute-force loop") {
    Rng rng = Rng::seeded(41);
    const auto net = make_mlp({4, 12, 6}, rng);
    Matrix x(30, 4), y(30, 6);
    for (double& v : x.data) v = rng.normal();
    for (int r = 0; r < 30; ++r) y(r, static_cast<int>(rng.below(6))) = 1.0;

    const Matrix logits = forward(net, x);
    int correct = 0;
    for (int r = 0; r < 30; ++r) {
        int pred = 0, truth = 0;
        for (int c = 1; c < 6; ++c) {
            if (logits(r, c) > logits(r, pred)) pred = c;
            if (y(r, c) > y(r, truth)) truth = c;
        }
        correct += pred == truth;
    }
    CHECK(accuracy(net, x, y) == doctest::Approx(correct / 30.0).epsilon(1e-15));
}

TEST_CASE("accuracy: trained nearest-mean geometry reaches 1.0 on separable blobs") {
    // Two opposite blob classes 12 sigma apart are linearly separable; one
    // epoch of SGD suffices for a perfect eval score on this seed.
    RunConfig cfg = tiny_run(MethodKind::Sgd);
    cfg.stream.n_tasks = 1;
    cfg.stream.samples_per_class = 200;
    cfg.stream.feature_dim = 8;
    cfg.lr = 0.1;
    cfg.seed = 3;
    const RunRecord rec = run(cfg);
    CHECK(rec.acc_final == 1.0);
}

TEST_CASE("estimate_lipschitz: stable within 20% across estimator seeds") {
    // Realistic fixture: a trained net and the buffer its run produced.
    DenseNetwork net;
    StepObserver grab = [&](int, const DenseNetwork& n) { net = n; };
    const RunRecord rec = run(tiny_run(MethodKind::Er), &grab);
    const auto& items = rec.buffer_snapshots.back();
    REQUIRE(items.size() >= 2);

    std::vector<double> estimates;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        estimates.push_back(estimate_lipschitz(net, items, 1000, Rng::seeded(seed)));
    const double m = testutil::mean(estimates);
    for (double c : estimates) {
        CHECK(c > 0.8 * m);
        CHECK(c < 1.2 * m);
    }
}

TEST_CASE("run: per-task eval losses cover all tasks at every checkpoint") {
    const RunRecord rec = run(tiny_run(MethodKind::Pcl));
    for (const auto& cs : rec.checkpoints)
        CHECK(cs.per_task_eval_loss.size() == 2);
    // Buffer stats exist once the buffer is non-empty.
    CHECK(std::isfinite(rec.checkpoints.back().buffer_loss_max));
    CHECK(std::isfinite(rec.checkpoints.back().c_lipschitz));
}
