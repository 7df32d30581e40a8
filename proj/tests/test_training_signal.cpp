#include "locrank/contrastive.hpp"

#include "support/planted.hpp"

#include <doctest.h>

using namespace locrank;

// Thresholds frozen from the pre-build calibration run of this exact
// configuration: random init Acc@1 = 0.415, post-training Acc@1 = 0.900.
TEST_CASE("contrastive training lifts retrieval accuracy on the planted corpus") {
    auto corpus = test_support::make_planted_corpus();
    auto initial = make_random_encoder(256, 16, /*hash_seed=*/21, /*init_seed=*/77);

    const double pre = test_support::planted_acc_at_1(corpus, initial);

    TrainOptions options;
    options.epochs = 4;
    options.learning_rate = 0.5;
    options.batch_size = 16;
    options.seed = 5;
    auto result = train_toy_encoder(corpus.triples, initial, options);

    const double post = test_support::planted_acc_at_1(corpus, result.encoder);

    CHECK(post > pre);
    CHECK(post >= pre + 0.30);

    // the loss curve must actually descend
    REQUIRE(result.loss_curve.size() >= 2);
    CHECK(result.loss_curve.back().second < result.loss_curve.front().second);
}
