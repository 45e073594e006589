#include "doctest.h"
#include "support/temp_dir.hpp"
#include "swd/config.hpp"
#include "swd/errors.hpp"

using namespace swd;

TEST_SUITE("config") {
  TEST_CASE("key-value parsing") {
    const auto kv = parse_key_values("# comment\n\nlambda = 0.1  # trailing\n  epochs=3\n", "run.cfg");
    REQUIRE(kv.size() == 2);
    CHECK(kv[0].key == "lambda");
    CHECK(kv[0].value == "0.1");
    CHECK(kv[0].line == 3);
    CHECK(kv[1].key == "epochs");
    CHECK_THROWS_WITH_AS(parse_key_values("a = 1\nno equals sign\n", "run.cfg"), doctest::Contains("run.cfg:2"),
                         ConfigError);
    CHECK_THROWS_AS(parse_key_values("= 4\n"), ConfigError);
  }

  TEST_CASE("value parsers") {
    CHECK(parse_bool("k", "true"));
    CHECK_FALSE(parse_bool("k", "off"));
    CHECK_THROWS_AS(parse_bool("k", "maybe"), ConfigError);
    CHECK(parse_size("k", "42") == 42);
    CHECK_THROWS_AS(parse_size("k", "-1"), ConfigError);
    CHECK_THROWS_AS(parse_size("k", "4x"), ConfigError);
    CHECK(parse_double("k", "1e-3") == 0.001);
    CHECK_THROWS_AS(parse_double("k", "abc"), ConfigError);
    CHECK(parse_u64("k", "18446744073709551615") == 18446744073709551615ull);
  }

  TEST_CASE("run configuration settings") {
    RunConfig c;
    apply_setting(c, "embed_dim", "400");
    apply_setting(c, "hidden_dim", "512");
    apply_setting(c, "lambda", "0.05");
    apply_setting(c, "seed", "12");
    apply_setting(c, "max_sentences", "8");
    apply_setting(c, "attention", "false");
    apply_setting(c, "weight_loss_form", "literal");
    apply_setting(c, "tokenization", "word");
    apply_setting(c, "delimiters", "|\\n");
    apply_setting(c, "rouge_variant", "l");
    CHECK(c.model.embed_dim == 400);
    CHECK(c.model.hidden_dim == 512);
    CHECK(c.train.lambda == 0.05);
    CHECK(c.model.seed == 12);
    CHECK(c.train.seed == 12);
    CHECK(c.model.max_sentences == 8);
    CHECK(c.corpus.max_sentences == 8);
    CHECK_FALSE(c.model.attention);
    CHECK(c.train.weight_loss_form == WeightLossForm::kLiteral);
    CHECK(c.corpus.tokenization == Tokenization::kWord);
    CHECK(c.corpus.delimiters == U"|\n");
    CHECK(c.rouge.variant == rouge::Variant::kRougeL);

    CHECK_THROWS_AS(apply_setting(c, "learning_rat", "0.1"), ConfigError);
    CHECK_THROWS_AS(apply_setting(c, "weight_loss_form", "other"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "epochs"), ConfigError);
    apply_override(c, "epochs=7");
    CHECK(c.train.epochs == 7);
  }

  TEST_CASE("every schema key is accepted") {
    for (const auto& [key, help] : run_config_schema()) {
      CHECK_FALSE(help.empty());
      RunConfig c;
      std::string value = "1";
      if (key == "attention" || key == "swd" || key == "detach_weights") value = "true";
      if (key == "tokenization") value = "char";
      if (key == "weight_loss_form") value = "estimated-target";
      if (key == "rouge_measure") value = "f";
      if (key == "delimiters") value = ".";
      if (key == "hidden_dim") value = "2";
      CHECK_NOTHROW(apply_setting(c, key, value));
    }
  }

  TEST_CASE("config files") {
    testing::TempDir dir;
    testing::write_file(dir / "run.cfg", "batch_size = 4\nlearning_rate = 0.5\n");
    const RunConfig c = load_run_config(dir / "run.cfg");
    CHECK(c.train.batch_size == 4);
    CHECK(c.train.learning_rate == 0.5);
    testing::write_file(dir / "bad.cfg", "batch_size = 4\nunknown = 1\n");
    CHECK_THROWS_WITH_AS(load_run_config(dir / "bad.cfg"), doctest::Contains("unknown"), ConfigError);
    CHECK_THROWS_AS(load_run_config(dir / "absent.cfg"), ConfigError);
  }
}
