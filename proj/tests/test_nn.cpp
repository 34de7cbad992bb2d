#include "hydrocube/nn/graph.hpp"
#include "hydrocube/nn/optim.hpp"
#include "hydrocube/nn/checkpoint.hpp"

#include <doctest.h>

#include <functional>
#include <random>

using namespace hydrocube;
using namespace hydrocube::nn;

namespace {

using TensorD = Tensor<double>;
using ParamD = Param<double>;

TensorD random_tensor(int ch, int h, int w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    TensorD t(ch, h, w);
    for (Eigen::Index i = 0; i < t.m.size(); ++i) t.m.reshaped()(i) = dist(rng);
    return t;
}

void randomize(ParamD& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.reshaped()(i) = dist(rng);
}

// Scalar objective for finite differencing: 0.5 * sum(out^2), so the seed
// gradient is the output itself.
double objective(const TensorD& out) { return 0.5 * out.m.squaredNorm(); }

// Checks d objective / d (input tensor and all params) against central
// differences. `builder` must rebuild the graph from scratch each call.
void check_builder_gradient(
    const std::function<Value<double>(Tape<double>&, Value<double>)>& builder, TensorD x,
    std::vector<ParamD*> params, bool check_input = true, double tol = 1e-6) {
    for (ParamD* p : params) p->zero_grad();

    Tape<double> tape;
    Value<double> xin = tape.input(x);
    Value<double> out = builder(tape, xin);
    TensorD seed = out.val();  // d(0.5*sum out^2)/d out = out
    tape.backward(out, seed);

    auto eval = [&](const TensorD& xt) {
        Tape<double> t;
        Value<double> xi = t.input(xt);
        return objective(builder(t, xi).val());
    };

    const double h = 1e-6;
    if (check_input) {
        REQUIRE(xin.node->grad_ready);
        for (Eigen::Index i = 0; i < x.m.size(); ++i) {
            TensorD hi = x, lo = x;
            hi.m.reshaped()(i) += h;
            lo.m.reshaped()(i) -= h;
            const double fd = (eval(hi) - eval(lo)) / (2 * h);
            CHECK(std::abs(fd - xin.node->grad.m.reshaped()(i)) <=
                  tol * std::max(1.0, std::abs(fd)));
        }
    }
    for (ParamD* p : params) {
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            const double keep = p->value.reshaped()(i);
            p->value.reshaped()(i) = keep + h;
            const double f_hi = eval(x);
            p->value.reshaped()(i) = keep - h;
            const double f_lo = eval(x);
            p->value.reshaped()(i) = keep;
            const double fd = (f_hi - f_lo) / (2 * h);
            CHECK(std::abs(fd - p->grad.reshaped()(i)) <= tol * std::max(1.0, std::abs(fd)));
        }
    }
}

}  // namespace

TEST_CASE("conv2d forward matches direct convolution") {
    std::mt19937_64 rng(101);
    TensorD x = random_tensor(2, 5, 6, rng);
    ParamD w("w", 3, 2 * 9), b("b", 3, 1);
    randomize(w, rng);
    randomize(b, rng);

    Tape<double> tape;
    auto y = conv2d(tape.input(x), w, b, 3);

    // direct zero-padded convolution
    for (int oc = 0; oc < 3; ++oc)
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 6; ++c) {
                double acc = b.value(oc, 0);
                for (int ic = 0; ic < 2; ++ic)
                    for (int dr = -1; dr <= 1; ++dr)
                        for (int dc = -1; dc <= 1; ++dc) {
                            const int sr = r + dr, sc = c + dc;
                            if (sr < 0 || sr >= 5 || sc < 0 || sc >= 6) continue;
                            acc += w.value(oc, (ic * 3 + dr + 1) * 3 + (dc + 1)) * x(ic, sr, sc);
                        }
                CHECK(y.val()(oc, r, c) == doctest::Approx(acc).epsilon(1e-12));
            }
}

TEST_CASE("op gradients vs finite differences") {
    std::mt19937_64 rng(103);

    SUBCASE("conv2d k=3") {
        TensorD x = random_tensor(2, 4, 4, rng);
        ParamD w("w", 3, 2 * 9), b("b", 3, 1);
        randomize(w, rng);
        randomize(b, rng);
        check_builder_gradient(
            [&](Tape<double>& t, Value<double> xin) { return conv2d(xin, w, b, 3); }, x, {&w, &b});
    }
    SUBCASE("conv2d k=1") {
        TensorD x = random_tensor(3, 4, 4, rng);
        ParamD w("w", 2, 3), b("b", 2, 1);
        randomize(w, rng);
        randomize(b, rng);
        check_builder_gradient(
            [&](Tape<double>& t, Value<double> xin) { return conv2d(xin, w, b, 1); }, x, {&w, &b});
    }
    SUBCASE("activations") {
        TensorD x = random_tensor(2, 4, 4, rng);
        check_builder_gradient([&](Tape<double>& t, Value<double> xin) { return sigmoid(xin); }, x, {});
        check_builder_gradient([&](Tape<double>& t, Value<double> xin) { return tanh_op(xin); }, x, {});
        // keep relu away from the kink
        x.m.array() += (x.m.array() > 0).template cast<double>() * 0.1 -
                       (x.m.array() <= 0).template cast<double>() * 0.1;
        check_builder_gradient([&](Tape<double>& t, Value<double> xin) { return relu(xin); }, x, {});
    }
    SUBCASE("arithmetic and routing") {
        TensorD x = random_tensor(4, 4, 4, rng);
        ParamD w("w", 2, 4), b("b", 2, 1);
        randomize(w, rng);
        randomize(b, rng);
        check_builder_gradient(
            [&](Tape<double>& t, Value<double> xin) {
                auto a = slice_channels(xin, 0, 2);
                auto bb = slice_channels(xin, 2, 2);
                auto s = add(hadamard(a, bb), sub(a, bb));
                auto cat = concat_channels(std::vector<Value<double>>{s, a});
                return conv2d(cat, w, b, 1);
            },
            x, {&w, &b});
    }
    SUBCASE("pooling and upsampling") {
        TensorD x = random_tensor(2, 4, 4, rng);
        check_builder_gradient([&](Tape<double>& t, Value<double> xin) { return maxpool2(xin); }, x,
                               {});
        check_builder_gradient([&](Tape<double>& t, Value<double> xin) { return upsample2(xin); }, x,
                               {});
    }
}

TEST_CASE("weight sharing accumulates gradients (time-distributed path)") {
    std::mt19937_64 rng(107);
    TensorD x = random_tensor(2, 4, 4, rng);
    ParamD enc_w("ew", 2, 1 * 9), enc_b("eb", 2, 1);
    ParamD fuse_w("fw", 1, 4), fuse_b("fb", 1, 1);
    randomize(enc_w, rng);
    randomize(enc_b, rng);
    randomize(fuse_w, rng);
    randomize(fuse_b, rng);
    // the same encoder applied to both frames (channel slices), then fused
    check_builder_gradient(
        [&](Tape<double>& t, Value<double> xin) {
            auto f0 = relu(conv2d(slice_channels(xin, 0, 1), enc_w, enc_b, 3));
            auto f1 = relu(conv2d(slice_channels(xin, 1, 1), enc_w, enc_b, 3));
            return conv2d(concat_channels(std::vector<Value<double>>{f0, f1}), fuse_w, fuse_b, 1);
        },
        x, {&enc_w, &enc_b, &fuse_w, &fuse_b});
}

TEST_CASE("recurrent cell gradient (small unrolled gate chain)") {
    std::mt19937_64 rng(109);
    TensorD x = random_tensor(1, 4, 4, rng);
    const int hidden = 2;
    ParamD gate_w("gw", 4 * hidden, (1 + hidden) * 9), gate_b("gb", 4 * hidden, 1);
    ParamD head_w("hw", 1, hidden), head_b("hb", 1, 1);
    randomize(gate_w, rng);
    randomize(gate_b, rng);
    randomize(head_w, rng);
    randomize(head_b, rng);

    check_builder_gradient(
        [&](Tape<double>& t, Value<double> xin) {
            Value<double> h = t.input(Tensor<double>::zeros(hidden, 4, 4));
            Value<double> c = t.input(Tensor<double>::zeros(hidden, 4, 4));
            for (int step = 0; step < 3; ++step) {
                auto z = conv2d(concat_channels(std::vector<Value<double>>{xin, h}), gate_w, gate_b, 3);
                auto i = sigmoid(slice_channels(z, 0, hidden));
                auto f = sigmoid(slice_channels(z, hidden, hidden));
                auto o = sigmoid(slice_channels(z, 2 * hidden, hidden));
                auto g = tanh_op(slice_channels(z, 3 * hidden, hidden));
                c = add(hadamard(f, c), hadamard(i, g));
                h = hadamard(o, tanh_op(c));
            }
            return conv2d(h, head_w, head_b, 1);
        },
        x, {&gate_w, &gate_b, &head_w, &head_b}, true, 1e-5);
}

TEST_CASE("adam converges on a quadratic") {
    ParamD p("p", 4, 1);
    p.value << 5, -3, 2, 8;
    Adam<double> opt({&p}, 0.1);
    for (int i = 0; i < 500; ++i) {
        p.grad = 2.0 * p.value;  // d/dp sum(p^2)
        opt.step();
    }
    CHECK(p.value.norm() < 1e-3);
}

TEST_CASE("weights round trip through a checkpoint blob") {
    namespace fs = std::filesystem;
    std::mt19937_64 rng(113);
    Param<float> a("a", 3, 7), b("b", 2, 2);
    std::uniform_real_distribution<float> dist(-1, 1);
    for (Eigen::Index i = 0; i < a.value.size(); ++i) a.value.reshaped()(i) = dist(rng);
    for (Eigen::Index i = 0; i < b.value.size(); ++i) b.value.reshaped()(i) = dist(rng);

    const fs::path file = fs::temp_directory_path() / "hydrocube_test_weights.bin";
    save_weights(file, {&a, &b});
    Param<float> a2("a", 3, 7), b2("b", 2, 2);
    load_weights(file, {&a2, &b2});
    CHECK(a2.value == a.value);
    CHECK(b2.value == b.value);

    Param<float> wrong("w", 1, 1);
    CHECK_THROWS_AS(load_weights(file, {&wrong}), std::runtime_error);
    fs::remove(file);
}

TEST_CASE("shape guards") {
    Tape<double> tape;
    std::mt19937_64 rng(127);
    auto x = tape.input(random_tensor(2, 4, 4, rng));
    auto y = tape.input(random_tensor(2, 4, 5, rng));
    CHECK_THROWS_AS(add(x, y), std::invalid_argument);
    ParamD w("w", 3, 99), b("b", 3, 1);
    CHECK_THROWS_AS(conv2d(x, w, b, 3), std::invalid_argument);
    auto odd = tape.input(random_tensor(1, 5, 4, rng));
    CHECK_THROWS_AS(maxpool2(odd), std::invalid_argument);
    CHECK_THROWS_AS(slice_channels(x, 1, 5), std::invalid_argument);
}
