#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "checkpoint.hpp"
#include "ipkp/ops.hpp"
#include "prototypes.hpp"
#include "training.hpp"

using namespace ipkp;

TEST_CASE("model builds and runs a forward pass") {
    Model m = lenet5();
    CHECK(m.param_layer_count() == 5);
    CHECK(m.param_count() == 61706);
    init_params(m, {InitScheme::Kind::GlorotUniform, 1});
    Tensor x({2, 1, 28, 28}, 0.5f);
    auto acts = forward(m, x);
    CHECK(acts.acts.back().shape == std::vector<int>{2, 10});
    CHECK(acts.acts.back().all_finite());
}

TEST_CASE("builtin prototypes render") {
    auto protos = builtin_digit_prototypes();
    CHECK(protos.size() == 10);
    auto set = render_prototypes(protos, 28, 28);
    CHECK(set.as_dataset().size() == 10);
}
