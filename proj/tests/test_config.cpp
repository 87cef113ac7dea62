#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "rcmk/config.hpp"
#include "rcmk/error.hpp"

using namespace rcmk;

TEST_CASE("parse handles sections, comments, and whitespace") {
    Config c = Config::parse(
        "# leading comment\n"
        "[model]\n"
        "  variant = MK  \n"
        "widths=8,16,32\n"
        "\n"
        "[train]\n"
        "lr = 0.05\n"
        "# trailing comment\n");
    CHECK(c.get("model", "variant") == "MK");
    CHECK(c.get("model", "widths") == "8,16,32");
    CHECK(c.get("train", "lr") == "0.05");
    CHECK(c.sections() == std::vector<std::string>{"model", "train"});
    CHECK(c.keys("model") == std::vector<std::string>{"variant", "widths"});
    CHECK(c.keys("nope").empty());
    CHECK(c.has("train", "lr"));
    CHECK(!c.has("train", "momentum"));
}

TEST_CASE("parse errors carry the offending line number") {
    CHECK_THROWS_WITH_AS(Config::parse("[model\n"), "line 1: unterminated section",
                         ConfigError);
    CHECK_THROWS_WITH_AS(Config::parse("[]\n"), "line 1: empty section name", ConfigError);
    CHECK_THROWS_WITH_AS(Config::parse("a = 1\n"), "line 1: key outside any section",
                         ConfigError);
    CHECK_THROWS_WITH_AS(Config::parse("[s]\n\nnot a pair\n"),
                         "line 3: expected key = value", ConfigError);
    CHECK_THROWS_WITH_AS(Config::parse("[s]\n= 3\n"), "line 2: empty key", ConfigError);
}

TEST_CASE("emit then parse is the identity and preserves order") {
    Config c;
    c.set("zeta", "k2", "b");
    c.set("zeta", "k1", "a");
    c.set("alpha", "x", "1");
    std::string text = c.emit();
    // insertion order survives, no alphabetical sorting
    CHECK(text == "[zeta]\nk2 = b\nk1 = a\n\n[alpha]\nx = 1\n");
    Config back = Config::parse(text);
    CHECK(back.emit() == text);
    CHECK(back.sections() == std::vector<std::string>{"zeta", "alpha"});

    Config d = default_config();
    CHECK(Config::parse(d.emit()).emit() == d.emit());
}

TEST_CASE("load reads a file and rejects a missing one") {
    namespace fs = std::filesystem;
    fs::path p = fs::current_path() / "rcmk_tmp_cfg.ini";
    {
        std::ofstream f(p);
        f << "[data]\ndataset = synth\n";
    }
    Config c = Config::load(p.string());
    CHECK(c.get("data", "dataset") == "synth");
    fs::remove(p);
    CHECK_THROWS_AS(Config::load(p.string()), ConfigError);
}

TEST_CASE("typed getters convert and validate") {
    Config c = Config::parse(
        "[s]\n"
        "i = 42\n"
        "neg = -7\n"
        "f = 0.25\n"
        "frac = 8/255\n"
        "b1 = TRUE\n"
        "b0 = off\n"
        "list = 1, 2,3\n"
        "junk = 12abc\n"
        "fracbad = 1/0\n");
    CHECK(c.get_int("s", "i") == 42);
    CHECK(c.get_int("s", "neg") == -7);
    CHECK(c.get_int_or("s", "missing", 5) == 5);
    CHECK(c.get_double("s", "f") == 0.25);
    CHECK(c.get_double("s", "frac") == 8.0 / 255.0);
    CHECK(c.get_double_or("s", "missing", 1.5) == 1.5);
    CHECK(c.get_bool_or("s", "b1", false));
    CHECK(!c.get_bool_or("s", "b0", true));
    CHECK(c.get_bool_or("s", "missing", true));
    CHECK(c.get_int_list_or("s", "list", {}) == std::vector<std::int64_t>{1, 2, 3});
    CHECK(c.get_int_list_or("s", "missing", {9}) == std::vector<std::int64_t>{9});
    CHECK(c.get_or("s", "missing", "dflt") == "dflt");

    CHECK_THROWS_AS(c.get("s", "missing"), ConfigError);
    CHECK_THROWS_AS(c.get_int("s", "junk"), ConfigError);
    CHECK_THROWS_AS(c.get_double("s", "junk"), ConfigError);
    CHECK_THROWS_AS(c.get_double("s", "fracbad"), ConfigError);
    CHECK_THROWS_AS(c.get_bool_or("s", "i", false), ConfigError);  // 42 is not a bool
    CHECK_THROWS_AS(c.get_int_list_or("s", "junk", {}), ConfigError);
}

TEST_CASE("set_from_arg walks the section.key=value shape") {
    Config c;
    c.set_from_arg("train.lr=0.1");
    c.set_from_arg(" model.variant = UK ");
    CHECK(c.get("train", "lr") == "0.1");
    CHECK(c.get("model", "variant") == "UK");
    c.set_from_arg("train.lr=0.2");  // overwrite keeps a single key
    CHECK(c.get("train", "lr") == "0.2");
    CHECK(c.keys("train") == std::vector<std::string>{"lr"});

    CHECK_THROWS_AS(c.set_from_arg("no_equals"), ConfigError);
    CHECK_THROWS_AS(c.set_from_arg("nodot=1"), ConfigError);
    CHECK_THROWS_AS(c.set_from_arg(".key=1"), ConfigError);
    CHECK_THROWS_AS(c.set_from_arg("section.=1"), ConfigError);
}

TEST_CASE("model spec derives from the model section") {
    Config c = default_config();
    ModelSpec spec = model_spec_from_config(c);
    CHECK(spec.variant == Variant::MK);
    CHECK(spec.widths == std::vector<std::int64_t>{8, 16, 32});
    CHECK(spec.k == 3);
    CHECK(spec.a == 1);
    CHECK(spec.tau == 0.0001);
    CHECK(spec.skip_connections);

    c.set("model", "variant", "rmk");
    c.set("model", "widths", "4,8");
    c.set("model", "skip_connections", "false");
    c.set("model", "k", "5");
    spec = model_spec_from_config(c);
    CHECK(spec.variant == Variant::RMK);
    CHECK(spec.widths == std::vector<std::int64_t>{4, 8});
    CHECK(!spec.skip_connections);
    CHECK(spec.k == 5);
}

TEST_CASE("train config derives from the train section") {
    Config c = default_config();
    TrainConfig t = train_config_from_config(c);
    CHECK(t.epochs == 5);
    CHECK(t.batch_size == 64);
    CHECK(t.lr == 0.05);
    CHECK(t.momentum == 0.9);
    CHECK(t.weight_decay == 0.0002);
    CHECK(t.lr_drop_epochs.empty());
    CHECK(t.seed == 0);
    CHECK(t.shuffle);

    c.set("train", "lr_drop_epochs", "3,4");
    c.set("train", "seed", "17");
    c.set("train", "hflip", "true");
    c.set("train", "crop_pad", "2");
    t = train_config_from_config(c);
    CHECK(t.lr_drop_epochs == std::vector<int>{3, 4});
    CHECK(t.seed == 17);
    CHECK(t.hflip);
    CHECK(t.crop_pad == 2);
}

TEST_CASE("attack spec derives from the attack section") {
    Config c = default_config();
    AttackSpec a = attack_spec_from_config(c);
    CHECK(a.kind == AttackKind::PGD);
    CHECK(a.epsilon == 8.0 / 255.0);
    CHECK(a.step_size == 2.0 / 255.0);
    CHECK(a.num_steps == 10);
    CHECK(!a.random_start);

    // the fast single-step attack fills its step from epsilon when unset
    Config f;
    f.set("attack", "kind", "ffgsm");
    f.set("attack", "epsilon", "0.1");
    a = attack_spec_from_config(f);
    CHECK(a.kind == AttackKind::FFGSM);
    CHECK(a.step_size == ffgsm_default_step(0.1));

    f.set("attack", "step_size", "0.07");
    a = attack_spec_from_config(f);
    CHECK(a.step_size == 0.07);
}

TEST_CASE("default config covers every consumer section") {
    Config c = default_config();
    for (const std::string& s : {"model", "data", "train", "attack", "corruption", "eval"})
        CHECK(!c.keys(s).empty());
    CHECK(c.get("data", "dataset") == "synth");
    CHECK(c.get_int_list_or("corruption", "severities", {}) ==
          std::vector<std::int64_t>{1, 2, 3, 4, 5});
}
