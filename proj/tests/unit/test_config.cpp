#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "sivstark/config.hpp"

using namespace sivstark;

namespace {

std::string key_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key_path;
  }
  return "<accepted>";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.geometry.gap_um, 7.6);
  EXPECT_EQ(c.geometry.applied_voltage_V, 10.0);
  EXPECT_EQ(c.geometry.epsilon_diamond, 5.7);
  EXPECT_EQ(c.probe.x_um, 1.9);
  EXPECT_EQ(c.probe.depth_nm, 100.0);
  EXPECT_FALSE(c.probe.kappa_MVpm_per_V.has_value());
  EXPECT_EQ(c.transition, TransitionLabel::C);
  EXPECT_EQ(c.scan.voltages_V.size(), 11u);
  EXPECT_EQ(c.scan.voltages_V.back(), 100.0);
  EXPECT_EQ(c.match.constraints.match_tolerance_MHz, 90.0);
  EXPECT_EQ(c.match.objective, MatchObjective::max_matched);
  EXPECT_EQ(c.ensemble.spec.n, 9);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* f : {"defaults.ini", "e4_like.ini"}) {
    const std::string text = slurp(std::string(SIVSTARK_CONFIG_DIR) + "/" + f);
    ASSERT_FALSE(text.empty()) << f;
    EXPECT_NO_THROW(parse_config(text)) << f;
  }
}

TEST(Config, ValuesAreRead) {
  const RunConfig c = parse_config(
      "[geometry]\nlayout = parallel_plates\ngap_um = 5\nepsilon = 1\n"
      "[probe]\nkappa_MVpm_per_V = 0.3\n"
      "[emitter]\ntransition = B\nalpha_MHz_per_MVpm2 = 4.5\n"
      "[scan]\nvoltages_V = 1, 2.5 ,4\nshot_noise = off\nseed = 123\n"
      "[amplitude]\nw_off_V = inf\n"
      "[match]\nobjective = min-max-residual\n");
  EXPECT_EQ(c.geometry.layout, ElectrodeLayout::parallel_plates);
  EXPECT_EQ(c.geometry.gap_um, 5.0);
  EXPECT_EQ(*c.probe.kappa_MVpm_per_V, 0.3);
  EXPECT_EQ(c.transition, TransitionLabel::B);
  EXPECT_EQ(c.emitter.params(TransitionLabel::B).alpha_MHz_per_MVpm2, 4.5);
  EXPECT_EQ(c.scan.voltages_V, (std::vector<double>{1.0, 2.5, 4.0}));
  EXPECT_FALSE(c.scan.acquisition.shot_noise);
  EXPECT_EQ(c.scan.seed, 123u);
  EXPECT_TRUE(std::isinf(c.amplitude.w_off_V));
  EXPECT_EQ(c.match.objective, MatchObjective::min_max_residual);
}

TEST(Config, VoltageRanges) {
  EXPECT_EQ(parse_config("[scan]\nvoltages_V = 0:25:100\n").scan.voltages_V,
            (std::vector<double>{0, 25, 50, 75, 100}));
  EXPECT_EQ(parse_config("[scan]\nvoltages_V = -10:5:0\n").scan.voltages_V, (std::vector<double>{-10, -5, 0}));
  EXPECT_TRUE(parse_config("[scan]\nvoltages_V =\n").scan.voltages_V.empty());
  EXPECT_EQ(key_of("[scan]\nvoltages_V = 0:0:10\n"), "scan.voltages_V");
  EXPECT_EQ(key_of("[scan]\nvoltages_V = 0:1\n"), "scan.voltages_V");
  EXPECT_EQ(key_of("[scan]\nvoltages_V = 1,,2\n"), "scan.voltages_V");
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_EQ(key_of("[geometry]\ngap_um = wide\n"), "geometry.gap_um");
  EXPECT_EQ(key_of("[geometry]\ngap_um = 7.6x\n"), "geometry.gap_um");
  EXPECT_EQ(key_of("[geometry]\nlayout = ring\n"), "geometry.layout");
  EXPECT_EQ(key_of("[geometry]\ncells_per_gap = 32\n"), "geometry.cells_per_gap");
  EXPECT_EQ(key_of("[geometry]\ncells_per_gap = 100.5\n"), "geometry.cells_per_gap");
  EXPECT_EQ(key_of("[geometry]\ngap_um = -1\n"), "geometry");
  EXPECT_EQ(key_of("[geometry]\ngap_size = 3\n"), "geometry.gap_size");
  EXPECT_EQ(key_of("[geometri]\ngap_um = 3\n"), "geometri");
  EXPECT_EQ(key_of("[probe]\nkappa_MVpm_per_V = 0\n"), "probe.kappa_MVpm_per_V");
  EXPECT_EQ(key_of("[emitter]\ntransition = E\n"), "emitter.transition");
  EXPECT_EQ(key_of("[scan]\npoints = 8\n"), "scan.points");
  EXPECT_EQ(key_of("[scan]\nshot_noise = maybe\n"), "scan.shot_noise");
  EXPECT_EQ(key_of("[scan]\nseed = -4\n"), "scan.seed");
  EXPECT_EQ(key_of("[fit]\nfield_rel_uncertainty = 1.5\n"), "fit.field_rel_uncertainty");
  EXPECT_EQ(key_of("[ensemble]\ncorrelation = 2\n"), "ensemble");
  EXPECT_EQ(key_of("[match]\nobjective = best\n"), "match.objective");
  EXPECT_EQ(key_of("[match]\nv_min_V = 50\nv_max_V = 10\n"), "match");
  EXPECT_EQ(key_of("[output]\nfield_map_stride = -1\n"), "output.field_map_stride");
}

TEST(Config, SyntaxErrorsGiveALine) {
  const std::string k = key_of("[geometry\ngap_um = 3\n");
  EXPECT_EQ(k.rfind("line", 0), 0u) << k;
  EXPECT_NE(key_of("gap_um = 3\n"), "<accepted>");
}

TEST(Config, MessageCarriesKeyPath) {
  try {
    parse_config("[lineshape]\ngamma0_MHz = fast\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lineshape.gamma0_MHz"), std::string::npos);
  }
}
