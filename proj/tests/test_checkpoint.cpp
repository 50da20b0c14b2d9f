#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <vector>

#include "llvit/checkpoint.hpp"
#include "llvit/data.hpp"
#include "llvit/errors.hpp"
#include "llvit/train.hpp"
#include "llvit/version.hpp"
#include "test_util.hpp"

using namespace llvit;

namespace {

RunConfig tiny_run_config() {
    RunConfig rc;
    rc.model = testutil::tiny_lut_config();
    rc.epochs = 4;
    rc.batch_size = 8;
    rc.augment = false;
    rc.seed = rc.model.seed;
    rc.out_dir = "unused";
    return rc;
}

}  // namespace

TEST_CASE("save and load round-trip every tensor bitwise") {
    testutil::TempDir tmp("ckpt");
    RunConfig rc = tiny_run_config();
    Model model(rc.model);
    Dataset ds = testutil::random_dataset(32, 8, 8, 1, 4, 81);
    model.calibrate(normalized_batch(ds, 0, 32));

    Optimizer opt(rc.opt);
    // one real step so the optimizer has content to store
    train_epoch(model, ds, opt, 1e-3f, 8, rc.seed, 0, false);

    const std::string path = tmp.path() + "/a.ckpt";
    save_checkpoint(path, rc, model, &opt, /*epoch=*/0, /*best_acc=*/0.25);
    Checkpoint ck = load_checkpoint(path);

    CHECK(ck.version == kToolVersion);
    CHECK(ck.epoch == 0);
    CHECK(ck.best_acc == doctest::Approx(0.25));
    CHECK(ck.opt_kind == "adamw");
    CHECK(ck.opt_step == opt.step_count());

    for (Parameter* p : model.params()) {
        REQUIRE(ck.tensors.count(p->name) == 1);
        const Tensor& t = ck.tensors.at(p->name);
        REQUIRE(t.shape() == p->value.shape());
        CHECK(std::memcmp(t.raw(), p->value.raw(), t.nbytes()) == 0);
    }
    // thermometer thresholds ride along even though they are not trainable
    CHECK(ck.tensors.count("block0.mixer.therm.thresholds") == 1);
    CHECK(ck.tensors.count("block1.mixer.therm.thresholds") == 1);
    // every optimizer moment round-trips under the opt. prefix
    for (const auto& [key, t] : opt.state()) {
        REQUIRE(ck.tensors.count("opt." + key) == 1);
        CHECK(std::memcmp(ck.tensors.at("opt." + key).raw(), t.raw(), t.nbytes()) == 0);
    }
    int64_t opt_tensors = 0;
    for (const auto& [name, t] : ck.tensors)
        if (name.rfind("opt.", 0) == 0) ++opt_tensors;
    CHECK(opt_tensors == static_cast<int64_t>(opt.state().size()));

    RunConfig rc2 = checkpoint_config(ck);
    CHECK(run_config_to_json(rc2) == run_config_to_json(rc));
}

TEST_CASE("restore_model reproduces the saved forward pass bitwise") {
    testutil::TempDir tmp("restore");
    RunConfig rc = tiny_run_config();
    Model model(rc.model);
    Dataset ds = testutil::random_dataset(32, 8, 8, 1, 4, 82);
    model.calibrate(normalized_batch(ds, 0, 32));
    Optimizer opt(rc.opt);
    train_epoch(model, ds, opt, 1e-3f, 8, rc.seed, 0, false);

    const std::string path = tmp.path() + "/b.ckpt";
    save_checkpoint(path, rc, model, &opt, 0, 0.0);

    Tensor probe = normalized_batch(ds, 0, 8);
    Tensor want = model.forward(probe);

    Checkpoint ck = load_checkpoint(path);
    Model fresh(checkpoint_config(ck).model);
    restore_model(fresh, ck);
    CHECK_FALSE(fresh.needs_calibration());  // thresholds came from the file
    Tensor got = fresh.forward(probe);
    CHECK(testutil::bitwise_equal(got, want));
}

TEST_CASE("resume-equivalence: split training equals uninterrupted training") {
    testutil::TempDir tmp("resume");
    RunConfig rc = tiny_run_config();
    Dataset ds = testutil::random_dataset(64, 8, 8, 1, 4, 83);

    auto lr_at = [&](int epoch) {
        return cosine_lr(rc.opt.lr, rc.lr_min_frac, epoch, rc.epochs);
    };

    // uninterrupted: four epochs straight
    Model full(rc.model);
    full.calibrate(normalized_batch(ds, 0, 64));
    Optimizer full_opt(rc.opt);
    for (int e = 0; e < 4; ++e) train_epoch(full, ds, full_opt, lr_at(e), 8, rc.seed, e, false);

    // interrupted: two epochs, checkpoint, restore, two more
    Model first(rc.model);
    first.calibrate(normalized_batch(ds, 0, 64));
    Optimizer first_opt(rc.opt);
    for (int e = 0; e < 2; ++e) train_epoch(first, ds, first_opt, lr_at(e), 8, rc.seed, e, false);
    const std::string path = tmp.path() + "/mid.ckpt";
    save_checkpoint(path, rc, first, &first_opt, /*epoch=*/1, 0.0);

    Checkpoint ck = load_checkpoint(path);
    Model second(checkpoint_config(ck).model);
    restore_model(second, ck);
    Optimizer second_opt(rc.opt);
    restore_optimizer(second_opt, ck);
    CHECK(second_opt.step_count() == first_opt.step_count());
    for (int e = 2; e < 4; ++e) train_epoch(second, ds, second_opt, lr_at(e), 8, rc.seed, e, false);

    for (size_t i = 0; i < full.params().size(); ++i) {
        Parameter* a = full.params()[i];
        Parameter* b = second.params()[i];
        REQUIRE(a->name == b->name);
        CHECK_MESSAGE(std::memcmp(a->value.raw(), b->value.raw(), a->value.nbytes()) == 0,
                      "parameter diverged after resume: " << a->name);
    }
}

TEST_CASE("corrupted or truncated files are rejected") {
    testutil::TempDir tmp("corrupt");
    RunConfig rc = tiny_run_config();
    Model model(rc.model);
    Dataset ds = testutil::random_dataset(16, 8, 8, 1, 4, 84);
    model.calibrate(normalized_batch(ds, 0, 16));
    const std::string path = tmp.path() + "/c.ckpt";
    save_checkpoint(path, rc, model, nullptr, -1, 0.0);

    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("NOTACKPT", 8);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SUBCASE("truncated payload") {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
        in.close();
        bytes.resize(bytes.size() - 64);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint(tmp.path() + "/nope.ckpt"), IoError);
    }
}

TEST_CASE("restore_model rejects checkpoints from a different architecture") {
    testutil::TempDir tmp("mismatch");
    RunConfig rc = tiny_run_config();
    Model model(rc.model);
    Dataset ds = testutil::random_dataset(16, 8, 8, 1, 4, 85);
    model.calibrate(normalized_batch(ds, 0, 16));
    const std::string path = tmp.path() + "/d.ckpt";
    save_checkpoint(path, rc, model, nullptr, -1, 0.0);

    Checkpoint ck = load_checkpoint(path);
    ModelConfig other = rc.model;
    other.dim = 32;  // different width -> every tensor shape shifts
    Model wrong(other);
    CHECK_THROWS_AS(restore_model(wrong, ck), FormatError);
}

TEST_CASE("restore_optimizer checks the optimizer kind") {
    testutil::TempDir tmp("optkind");
    RunConfig rc = tiny_run_config();
    Model model(rc.model);
    Dataset ds = testutil::random_dataset(16, 8, 8, 1, 4, 86);
    model.calibrate(normalized_batch(ds, 0, 16));
    Optimizer adam(rc.opt);
    train_epoch(model, ds, adam, 1e-3f, 8, rc.seed, 0, false);
    const std::string path = tmp.path() + "/e.ckpt";
    save_checkpoint(path, rc, model, &adam, 0, 0.0);

    Checkpoint ck = load_checkpoint(path);
    OptimizerConfig sgd_cfg;
    sgd_cfg.kind = OptKind::sgd_momentum;
    Optimizer sgd(sgd_cfg);
    CHECK_THROWS_AS(restore_optimizer(sgd, ck), FormatError);
}

TEST_CASE("checkpoint bytes are deterministic for a fixed model state") {
    testutil::TempDir tmp("deterministic");
    RunConfig rc = tiny_run_config();
    Model model(rc.model);
    Dataset ds = testutil::random_dataset(16, 8, 8, 1, 4, 87);
    model.calibrate(normalized_batch(ds, 0, 16));
    save_checkpoint(tmp.path() + "/x.ckpt", rc, model, nullptr, -1, 0.0);
    save_checkpoint(tmp.path() + "/y.ckpt", rc, model, nullptr, -1, 0.0);
    std::ifstream fx(tmp.path() + "/x.ckpt", std::ios::binary);
    std::ifstream fy(tmp.path() + "/y.ckpt", std::ios::binary);
    std::vector<char> bx((std::istreambuf_iterator<char>(fx)), {});
    std::vector<char> by((std::istreambuf_iterator<char>(fy)), {});
    CHECK(bx == by);
}
