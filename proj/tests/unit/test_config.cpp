#include <gtest/gtest.h>

#include <filesystem>

#include "tvk/config.hpp"
#include "tvk/errors.hpp"
#include "tvk/experiment.hpp"

namespace tvk {
namespace {

const char* kControlText = R"(
[experiment]
name = "grn-small"
mode = "control"
methods = ["fixed-dko", "otvdkl"]
repeats = 2
seed = 7
out = "runs/test"

[plant]
name = "grn"
dt = 1.0

[lifting]
layers = [6, 16, 6]

[training]
epochs = 0
lambda = 1e-3

[online]
w = 40
b = 10

[control]
H = 8
q_diag = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
r_diag = [0.1, 0.1, 0.1]
u_nominal = [0.0, 1.0, 1.0]
ref_target = "steady"
ident_steps = 60
steps = 100
)";

TEST(ConfigDocument, ParsesScalarsAndArrays) {
  const ConfigDocument d = ConfigDocument::parse("a = 1\nb = 2.5\n[t]\nc = \"x\" # note\nd = [1, 2.0]\ne = true\n");
  EXPECT_EQ(d.get("", "a").as_int(), 1);
  EXPECT_DOUBLE_EQ(d.get("", "b").as_double(), 2.5);
  EXPECT_EQ(d.get("t", "c").as_string(), "x");
  EXPECT_EQ(d.get("t", "d").as_doubles(), (std::vector<double>{1.0, 2.0}));
  EXPECT_TRUE(d.get("t", "e").as_bool());
  EXPECT_EQ(d.get_or("t", "missing", 4.0), 4.0);
}

TEST(ConfigDocument, SerializeRoundTrip) {
  ConfigDocument d;
  d.set("x", "pi", ConfigValue::number(3.141592653589793));
  d.set("x", "third", ConfigValue::number(1.0 / 3.0));
  d.set("x", "names", ConfigValue::strings({"a", "b c"}));
  d.set("", "n", ConfigValue::integer(-12));
  EXPECT_TRUE(ConfigDocument::parse(d.serialize()) == d);
}

TEST(ConfigDocument, MalformedInputThrows) {
  EXPECT_THROW(ConfigDocument::parse("a = \n"), ConfigError);
  EXPECT_THROW(ConfigDocument::parse("[unterminated\n"), ConfigError);
  EXPECT_THROW(ConfigDocument::parse("a = 1\na = 2\n"), ConfigError);
}

TEST(ExperimentConfig, ControlConfigRoundTrip) {
  const ExperimentConfig c = ExperimentConfig::from_document(ConfigDocument::parse(kControlText));
  c.validate();
  EXPECT_EQ(c.control.u_nominal, (std::vector<double>{0.0, 1.0, 1.0}));
  EXPECT_EQ(c.control.ref_target, "steady");
  EXPECT_EQ(c.w, 40);
  const ExperimentConfig back = ExperimentConfig::from_document(ConfigDocument::parse(c.to_document().serialize()));
  EXPECT_TRUE(back == c);
}

TEST(ExperimentConfig, ShippedConfigsValidate) {
  for (const auto& e : std::filesystem::directory_iterator(TVK_CONFIG_DIR)) {
    if (e.path().extension() != ".toml") continue;
    SCOPED_TRACE(e.path().string());
    const ExperimentConfig c = ExperimentConfig::load(e.path().string());
    EXPECT_NO_THROW(c.validate());
    EXPECT_TRUE(ExperimentConfig::from_document(c.to_document()) == c);
  }
}

TEST(ExperimentConfig, UnknownKeyIsRejected) {
  EXPECT_THROW(ExperimentConfig::from_document(ConfigDocument::parse("[online]\nwindow = 3\n")), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_document(ConfigDocument::parse("[bogus]\nw = 3\n")), ConfigError);
}

TEST(ExperimentConfig, ControlValidation) {
  ExperimentConfig c = ExperimentConfig::from_document(ConfigDocument::parse(kControlText));
  c.control.u_nominal = {1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.control.u_nominal.clear();
  EXPECT_NO_THROW(c.validate());
  c.control.ref_target = "lookahead";
  EXPECT_THROW(c.validate(), ConfigError);
  c.control.ref_target = "trajectory";
  c.control.r_diag = {0.1};
  EXPECT_THROW(c.validate(), ConfigError);
  c.control.r_diag = {0.1, 0.1, 0.1};
  c.b = 50;
  EXPECT_THROW(c.validate(), ConfigError);
  c.b = 10;
  c.methods = {"dmd"};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ExperimentConfig, PredictValidation) {
  ExperimentConfig c;
  c.plant.name = "duffing";
  c.w = 30;
  c.t_start = 20;
  EXPECT_THROW(c.validate(), ConfigError);
  c.t_start = 30;
  c.plant.steps = 30;
  EXPECT_THROW(c.validate(), ConfigError);
  c.plant.steps = 100;
  EXPECT_NO_THROW(c.validate());
  c.plant.name = "pendulum";
  EXPECT_THROW(c.validate(), ConfigError);
}

// Reference splitmix64 stream: state advances by the golden gamma before each output.
std::uint64_t splitmix_nth(std::uint64_t state, int n) {
  std::uint64_t z = 0;
  for (int i = 0; i <= n; ++i) {
    state += 0x9e3779b97f4a7c15ULL;
    z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
  }
  return z;
}

TEST(Seeds, DerivedStreamsFollowSplitmix) {
  EXPECT_EQ(derive_seed(0, 0), 0xe220a8397b1dcdafULL);
  for (std::uint64_t seed : {1ULL, 42ULL, 20240611ULL})
    for (int s = 0; s < 5; ++s) EXPECT_EQ(derive_seed(seed, static_cast<std::uint64_t>(s)), splitmix_nth(seed, s));
  EXPECT_NE(derive_seed(3, 0), derive_seed(3, 1));
}

}  // namespace
}  // namespace tvk
