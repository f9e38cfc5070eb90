#include <doctest.h>

#include "helpers.hpp"
#include "uda/config.hpp"

using namespace uda;

TEST_CASE("defaults reproduce the reference setup") {
  RunConfig c;
  c.finalize();
  CHECK(c.train.epochs == 32);
  CHECK(c.train.batch_size == 64);
  CHECK(c.train.schedule.lr_max == 1e-4);
  CHECK(c.train.schedule.warmup_epochs == 5);
  CHECK(c.train.schedule.cosine_epochs == 27);
  CHECK(c.train.model.heads == 4);
  CHECK(c.train.model.hidden_dim == 512);
  CHECK(c.train.model.lambda_grl == 1.0);
  CHECK(c.train.lambda_align == 1.0);
  CHECK(c.train.optimizer.weight_decay == 0.01);
  CHECK(!c.train.model.self_loops);
  CHECK_NOTHROW(c.train.validate());
}

TEST_CASE("config text parsing") {
  RunConfig c;
  apply_config_text(c, "# comment\n epochs = 10 \nlr=0.001  # trailing\n\nuse_mmd=false\nmmd_bandwidth=2.5\n");
  c.finalize();
  CHECK(c.train.epochs == 10);
  CHECK(c.train.schedule.warmup_epochs == 5);
  CHECK(c.train.schedule.cosine_epochs == 5);
  CHECK(c.train.schedule.lr_max == 0.001);
  CHECK(!c.train.use_mmd);
  CHECK(*c.train.kernel.fixed_bandwidth == 2.5);
  CHECK_NOTHROW(c.train.validate());

  RunConfig short_run;
  short_run.set("epochs", "2");
  short_run.finalize();
  CHECK(short_run.train.schedule.warmup_epochs == 2);
  CHECK(short_run.train.schedule.cosine_epochs == 0);
  CHECK_NOTHROW(short_run.train.validate());
}

TEST_CASE("config errors") {
  RunConfig c;
  auto kind = [&](const char* text) {
    try {
      apply_config_text(c, text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind("bogus=1") == ErrorKind::Config);
  CHECK(kind("epochs=ten") == ErrorKind::Config);
  CHECK(kind("epochs") == ErrorKind::Config);
  CHECK(kind("use_grl=maybe") == ErrorKind::Config);
  CHECK(kind("activation=tanh") == ErrorKind::Config);
  CHECK(kind("mmd_bandwidth=-1") == ErrorKind::Config);
  try {
    apply_config_file(c, "/nonexistent/cfg.txt");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}

TEST_CASE("settings echo every key and round-trip") {
  RunConfig c;
  apply_config_text(c, "seed=99\nseparation=2.75\nbank_momentum=0.85\nactivation=elu\nmmd_estimator=unbiased\n");
  c.finalize();
  const auto s = c.settings();
  RunConfig back;
  for (const auto& [k, v] : s) back.set(k, v);
  back.finalize();
  CHECK(back.settings() == s);
  bool found = false;
  for (const auto& [k, v] : s) {
    if (k == "bank_momentum") {
      CHECK(v == "0.85");
      found = true;
    }
  }
  CHECK(found);
  CHECK(c.synthetic.seed == 99);
  CHECK(c.train.seed == 99);
}
