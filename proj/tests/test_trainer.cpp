#include <doctest.h>

#include <cmath>

#include "syswatch/errors.hpp"
#include "syswatch/rng.hpp"
#include "syswatch/trainer.hpp"

using namespace syswatch;

namespace {

ModelConfig desk_config(int32_t context, uint64_t seed = 1) {
    ModelConfig cfg;
    cfg.context = context;
    cfg.vocab_size = 16;
    cfg.embed_dim = 64;
    cfg.num_layers = 2;
    cfg.num_heads = 4;
    cfg.dropout = 0.1f;
    cfg.init_seed = seed;
    return cfg;
}

// Trivially separable task: class k windows repeat token 3+k.
std::vector<TokenWindow> separable_windows(int per_class, int32_t context, uint64_t seed) {
    Rng rng(seed);
    std::vector<TokenWindow> windows;
    for (int c = 0; c < kNumClasses; ++c) {
        for (int i = 0; i < per_class; ++i) {
            TokenWindow w;
            w.ids.assign(static_cast<size_t>(context), 0);
            w.ids[0] = 2;
            const auto fill = 2 + rng.uniform_index(static_cast<uint64_t>(context - 2));
            for (uint64_t t = 1; t <= fill; ++t)
                w.ids[static_cast<size_t>(t)] = static_cast<int32_t>(3 + c);
            w.valid_len = static_cast<int32_t>(fill + 1);
            w.label = static_cast<BehaviorClass>(c);
            windows.push_back(std::move(w));
        }
    }
    return windows;
}

double train_accuracy(const ClassifierModel& model, std::span<const TokenWindow> windows) {
    const auto probs = model.forward_batch(windows);
    int hits = 0;
    for (size_t i = 0; i < windows.size(); ++i) {
        const auto arg = std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin();
        if (arg == static_cast<int64_t>(*windows[i].label)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(windows.size());
}

bool params_equal(const nn::NetParams<float>& a, const nn::NetParams<float>& b) {
    const auto ta = a.tensors();
    const auto tb = b.tensors();
    for (size_t i = 0; i < ta.size(); ++i)
        for (Eigen::Index j = 0; j < ta[i].size; ++j)
            if (ta[i].data[j] != tb[i].data[j]) return false;
    return true;
}

}  // namespace

TEST_CASE("cross entropy values") {
    CHECK(cross_entropy({1, 0, 0, 0, 0}, BehaviorClass::Normal) == 0.0);
    const ProbabilityVector uniform = {0.2, 0.2, 0.2, 0.2, 0.2};
    CHECK(cross_entropy(uniform, BehaviorClass::Bdvl) ==
          doctest::Approx(std::log(5.0)).epsilon(1e-12));
    CHECK(cross_entropy({0, 1, 0, 0, 0}, BehaviorClass::Normal) ==
          doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("adamw first step matches the hand-derived update") {
    ModelConfig cfg;
    cfg.context = 2;
    cfg.vocab_size = 3;
    cfg.embed_dim = 1;
    cfg.num_layers = 1;
    cfg.num_heads = 1;

    auto params = nn::NetParams<double>::sized(cfg);
    auto grads = nn::NetParams<double>::sized(cfg);
    params.token_embed(0, 0) = 1.5;
    grads.token_embed(0, 0) = 1.0;

    const double lr = 0.1;
    AdamWOptimizer<double> opt(lr, 0.9, 0.999, 1e-8, 0.0);
    opt.step(params, grads);

    // t=1: m_hat = v_hat = 1 exactly, so the step is lr / (1 + eps).
    const double m_hat = (0.1 * 1.0) / (1.0 - 0.9);
    const double v_hat = (0.001 * 1.0) / (1.0 - 0.999);
    const double expected = 1.5 - lr * (m_hat / (std::sqrt(v_hat) + 1e-8));
    CHECK(std::abs(params.token_embed(0, 0) - expected) < 1e-9);
    CHECK(params.token_embed(0, 0) < 1.5);
    CHECK(std::abs((1.5 - params.token_embed(0, 0)) - 0.1) < 1e-6);
}

TEST_CASE("adamw zero gradient leaves parameters unchanged without decay") {
    ModelConfig cfg;
    cfg.context = 2;
    cfg.vocab_size = 3;
    cfg.embed_dim = 2;
    cfg.num_layers = 1;
    cfg.num_heads = 1;
    auto params = nn::init_params<double>(cfg, 5);
    const auto before = params;
    const auto grads = nn::NetParams<double>::sized(cfg);

    AdamWOptimizer<double> opt(0.1, 0.9, 0.999, 1e-8, 0.0);
    opt.step(params, grads);
    const auto ta = params.tensors();
    const auto tb = before.tensors();
    for (size_t i = 0; i < ta.size(); ++i)
        for (Eigen::Index j = 0; j < ta[i].size; ++j)
            CHECK(ta[i].data[j] == tb[i].data[j]);
}

TEST_CASE("adamw zero gradient with weight decay is an exact multiplicative shrink") {
    ModelConfig cfg;
    cfg.context = 2;
    cfg.vocab_size = 3;
    cfg.embed_dim = 2;
    cfg.num_layers = 1;
    cfg.num_heads = 1;
    auto params = nn::init_params<double>(cfg, 6);
    const auto before = params;
    const auto grads = nn::NetParams<double>::sized(cfg);

    const double lr = 0.05, wd = 0.01;
    AdamWOptimizer<double> opt(lr, 0.9, 0.999, 1e-8, wd);
    opt.step(params, grads);

    const double factor = 1.0 - lr * wd;
    const auto ta = params.tensors();
    const auto tb = before.tensors();
    for (size_t i = 0; i < ta.size(); ++i)
        for (Eigen::Index j = 0; j < ta[i].size; ++j)
            CHECK(ta[i].data[j] == tb[i].data[j] * factor);
}

TEST_CASE("adamw is antisymmetric in the gradient for fresh state") {
    ModelConfig cfg;
    cfg.context = 2;
    cfg.vocab_size = 3;
    cfg.embed_dim = 2;
    cfg.num_layers = 1;
    cfg.num_heads = 1;

    auto grads = nn::NetParams<double>::sized(cfg);
    Rng rng(8);
    for (auto& t : grads.tensors())
        for (Eigen::Index j = 0; j < t.size; ++j) t.data[j] = rng.normal();

    auto params_pos = nn::init_params<double>(cfg, 9);
    auto params_neg = params_pos;
    const auto before = params_pos;

    AdamWOptimizer<double> opt_pos(0.02, 0.9, 0.999, 1e-8, 0.0);
    opt_pos.step(params_pos, grads);
    grads.scale(-1.0);
    AdamWOptimizer<double> opt_neg(0.02, 0.9, 0.999, 1e-8, 0.0);
    opt_neg.step(params_neg, grads);

    const auto tp = params_pos.tensors();
    const auto tn = params_neg.tensors();
    const auto tb = before.tensors();
    for (size_t i = 0; i < tp.size(); ++i)
        for (Eigen::Index j = 0; j < tp[i].size; ++j) {
            const double dp = tp[i].data[j] - tb[i].data[j];
            const double dn = tn[i].data[j] - tb[i].data[j];
            // Opposite-sign deltas of equal magnitude up to rounding.
            CHECK(dp * dn <= 0.0);
            CHECK(std::abs(dp + dn) < 1e-12);
        }
}

TEST_CASE("adamw rejects non-finite gradients") {
    ModelConfig cfg;
    cfg.context = 2;
    cfg.vocab_size = 3;
    cfg.embed_dim = 2;
    cfg.num_layers = 1;
    cfg.num_heads = 1;
    auto params = nn::NetParams<double>::sized(cfg);
    auto grads = nn::NetParams<double>::sized(cfg);
    grads.head_b(0) = std::numeric_limits<double>::quiet_NaN();
    AdamWOptimizer<double> opt(0.1, 0.9, 0.999, 1e-8, 0.0);
    CHECK_THROWS_AS(opt.step(params, grads), NumericalFault);
}

TEST_CASE("lr = 0 is the null update") {
    ClassifierModel model(desk_config(8, 11));
    const auto before = model.params();
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.lr = 0.0;
    tcfg.shuffle_seed = 3;
    const auto windows = separable_windows(4, 8, 21);
    train(model, windows, tcfg);
    CHECK(params_equal(model.params(), before));
}

TEST_CASE("training a separable task reaches 0.95 accuracy and the loss drops") {
    ClassifierModel model(desk_config(8, 123));
    TrainConfig tcfg;
    tcfg.epochs = 5;
    tcfg.lr = 1e-3;
    tcfg.shuffle_seed = 5;
    const auto windows = separable_windows(40, 8, 31);  // 200 windows
    const auto report = train(model, windows, tcfg);

    REQUIRE(report.epochs.size() == 5);
    CHECK(report.epochs.front().train_loss > report.epochs.back().train_loss);
    CHECK(train_accuracy(model, windows) >= 0.95);
    for (const auto& e : report.epochs) CHECK(e.seconds >= 0.0);
}

TEST_CASE("training is deterministic given seeds") {
    const auto windows = separable_windows(8, 8, 41);
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.lr = 1e-3;
    tcfg.shuffle_seed = 7;

    ClassifierModel a(desk_config(8, 55));
    const auto ra = train(a, windows, tcfg);
    ClassifierModel b(desk_config(8, 55));
    const auto rb = train(b, windows, tcfg);

    REQUIRE(ra.epochs.size() == rb.epochs.size());
    for (size_t e = 0; e < ra.epochs.size(); ++e)
        CHECK(ra.epochs[e].train_loss == rb.epochs[e].train_loss);
    CHECK(params_equal(a.params(), b.params()));
}

TEST_CASE("a class missing from the training data is rejected") {
    auto windows = separable_windows(4, 8, 51);
    std::erase_if(windows,
                  [](const TokenWindow& w) { return w.label == BehaviorClass::Bdvl; });
    ClassifierModel model(desk_config(8, 60));
    TrainConfig tcfg;
    tcfg.epochs = 1;
    CHECK_THROWS_AS(train(model, windows, tcfg), ClassMissing);
}

TEST_CASE("train config validation") {
    TrainConfig tcfg;
    tcfg.epochs = 0;
    CHECK_THROWS_AS(tcfg.validate(), InvalidConfig);
    tcfg = TrainConfig{};
    tcfg.val_fraction = 1.0;
    CHECK_THROWS_AS(tcfg.validate(), InvalidConfig);
    tcfg = TrainConfig{};
    tcfg.batch_size = 0;
    CHECK_THROWS_AS(tcfg.validate(), InvalidConfig);
}

namespace {

ModelConfig grad_check_config(uint64_t seed) {
    ModelConfig cfg;
    cfg.context = 32;
    cfg.vocab_size = 20;
    cfg.embed_dim = 32;
    cfg.num_layers = 2;
    cfg.num_heads = 4;
    cfg.dropout = 0.0f;
    cfg.init_seed = seed;
    return cfg;
}

TokenWindow grad_check_window(uint64_t seed, const ModelConfig& cfg) {
    Rng rng(seed);
    TokenWindow w;
    w.ids.assign(static_cast<size_t>(cfg.context), 0);
    w.ids[0] = 2;
    w.valid_len = cfg.context - 3;  // exercise the PAD boundary
    for (int32_t t = 1; t < w.valid_len; ++t)
        w.ids[static_cast<size_t>(t)] =
            static_cast<int32_t>(3 + rng.uniform_index(static_cast<uint64_t>(cfg.vocab_size - 3)));
    return w;
}

}  // namespace

TEST_CASE("analytic gradients match finite differences") {
    for (const auto& pattern :
         {AttentionPattern(DensePattern{}), AttentionPattern(SlidingWindowPattern{3, 1}),
          AttentionPattern(BlockSparsePattern{4, 1, 1, 1, 3})}) {
        auto cfg = grad_check_config(321);
        cfg.pattern = pattern;
        ClassifierModel model(cfg);
        const auto w = grad_check_window(77, cfg);
        const auto result = grad_check(model, w, BehaviorClass::TheTick);
        INFO("pattern ", to_string(pattern), " max rel err ", result.max_rel_error);
        CHECK(result.coords_checked >= 200);
        CHECK(result.pass);
    }
}

TEST_CASE("grad check detects an injected 1% gradient error") {
    auto cfg = grad_check_config(321);
    ClassifierModel model(cfg);
    const auto w = grad_check_window(78, cfg);

    GradCheckOptions opt;
    int tensor_index = -1;
    {
        auto views = model.params().tensors();
        for (size_t i = 0; i < views.size(); ++i)
            if (views[i].name == "layer0.wv") tensor_index = static_cast<int>(i);
    }
    REQUIRE(tensor_index >= 0);
    opt.perturb_tensor = tensor_index;
    opt.perturb_factor = 1.01;
    const auto result = grad_check(model, w, BehaviorClass::Normal, opt);
    CHECK_FALSE(result.pass);
    CHECK(result.max_rel_error > 1e-4);
}

TEST_CASE("grad check agrees on a zeroed head") {
    auto cfg = grad_check_config(500);
    ClassifierModel model(cfg);
    model.zero_head();
    const auto w = grad_check_window(81, cfg);
    const auto result = grad_check(model, w, BehaviorClass::Bashlite);
    CHECK(result.pass);
}
