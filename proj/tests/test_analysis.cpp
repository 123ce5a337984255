#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fbs/analysis.hpp"

using namespace fbs;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

PulseSchedule super_pulse(std::size_t n, double alpha, double periods) {
  PulseSchedule s;
  s.n_pairs = n;
  const Drive d = Drive::uniform(n, alpha);
  s.segments.push_back({d, periods * std::numbers::pi / d.collective_rate(), "super"});
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fbs_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("lossless single-excitation traces conserve probability", "[analysis][property]") {
  const auto s = super_pulse(3, 2424.0, 2.0);
  TraceOptions o;
  o.samples = 101;
  const Trace tr = probability_trace(s, single_excitation_patterns(3), {}, o);
  REQUIRE(tr.labels == std::vector<std::string>{"P_1", "P_2", "P_3", "P_ph", "W"});
  for (std::size_t i = 0; i < tr.x.size(); ++i) {
    const double w = tr.at("P_1")[i] + tr.at("P_2")[i] + tr.at("P_3")[i];
    CHECK(std::abs(tr.at("W")[i] - w) < 1e-15);
    CHECK(std::abs(w + tr.at("P_ph")[i] - 1.0) < 1e-10);
  }
  CHECK(tr.x.front() == 0.0);
  CHECK(tr.x.back() == Catch::Approx(s.total_duration()).epsilon(1e-15));
  // at t_W (sample 25 of 100 over two periods of pi/sqrt(eta)) the W series peaks
  CHECK(tr.at("W")[25] == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("closed-form and matrix-exponential traces coincide", "[analysis][property]") {
  const auto s = super_pulse(4, 3.0, 1.7);
  TraceOptions o;
  o.samples = 64;
  EngineConfig cf;
  cf.propagator = Propagator::closed_form;
  const Trace a = probability_trace(s, single_excitation_patterns(4), {}, o);
  const Trace b = probability_trace(s, single_excitation_patterns(4), cf, o);
  for (std::size_t k = 0; k < a.series.size(); ++k)
    for (std::size_t i = 0; i < a.x.size(); ++i) CHECK(std::abs(a.series[k][i] - b.series[k][i]) < 1e-10);
}

TEST_CASE("sampled traces agree with one-shot runs across segment boundaries", "[analysis]") {
  PulseSchedule s;
  s.n_pairs = 2;
  s.initial_state = InitialState::photon(0);
  s.segments.push_back({Drive::single(2, 0, 2.0), 0.5, "a"});
  s.segments.push_back({Drive::single(2, 1, 1.0, 0.3), 0.9, "b"});
  TraceOptions o;
  o.samples = 15;
  const Trace tr = probability_trace(s, single_excitation_patterns(2), {}, o);
  const auto r = run_schedule(s);
  CHECK(std::abs(tr.at("P_2").back() - partial_probability(r.state, patterns::exactly({0, 1, 0}))) < 1e-12);
  REQUIRE_THROWS_AS(probability_trace(s, {}, {}, o), ConfigError);
  o.samples = 1;
  REQUIRE_THROWS_AS(probability_trace(s, single_excitation_patterns(2), {}, o), ConfigError);
}

TEST_CASE("CSV round trip is bit-exact", "[analysis][io]") {
  const auto s = super_pulse(2, 1.3, 1.0);
  TraceOptions o;
  o.samples = 33;
  const Trace tr = probability_trace(s, single_excitation_patterns(2), {}, o);
  std::stringstream ss;
  write_csv(ss, tr);
  CHECK(ss.str().rfind("gt,P_1,P_2,P_ph,W\n", 0) == 0);
  const Trace back = read_csv(ss);
  REQUIRE(back.labels == tr.labels);
  REQUIRE(back.x == tr.x);
  REQUIRE(back.series == tr.series);
  std::stringstream bad("gt,a\n1,2,3\n");
  REQUIRE_THROWS_AS(read_csv(bad), ConfigError);
}

TEST_CASE("SVG output", "[analysis][io]") {
  const auto s = super_pulse(3, 1.0, 1.0);
  TraceOptions o;
  o.samples = 20;
  Trace tr = probability_trace(s, single_excitation_patterns(3), {}, o);
  tr.markers = {s.total_duration() / 2};
  std::stringstream ss;
  write_svg(ss, tr, "demo <N=3>");
  const std::string svg = ss.str();
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("stroke-dasharray=\"6,4\" points=") != std::string::npos);  // dashed W
  CHECK(svg.find("&lt;N=3&gt;") != std::string::npos);
  std::size_t lines = 0;
  for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
  CHECK(lines == tr.series.size());
  CHECK(svg.find("</svg>") != std::string::npos);
  REQUIRE_THROWS_WITH(write_svg(ss, Trace{}), ContainsSubstring("no series"));
}

TEST_CASE("emit writes atomically", "[analysis][io]") {
  const auto dir = scratch("emit");
  const auto s = super_pulse(2, 1.0, 1.0);
  const Trace tr = probability_trace(s, single_excitation_patterns(2));
  emit(tr, Format::csv, dir / "sub" / "t.csv");
  emit(tr, Format::svg, dir / "t.svg");
  CHECK(fs::exists(dir / "sub" / "t.csv"));
  CHECK(fs::exists(dir / "t.svg"));
  CHECK_FALSE(fs::exists(dir / "t.svg.partial"));
  CHECK(load_csv(dir / "sub" / "t.csv").series == tr.series);
  REQUIRE_THROWS_WITH(emit(Trace{}, Format::csv, dir / "empty.csv"), ContainsSubstring("no series"));
  CHECK_FALSE(fs::exists(dir / "empty.csv"));
  REQUIRE_THROWS_AS(parse_format("png"), ConfigError);

  write_summary_csv(dir / "summary.csv", "gamma_over_g", "fidelity", {0, 1}, {1, 0.5});
  std::ifstream in(dir / "summary.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "gamma_over_g,fidelity");
}

TEST_CASE("fidelity falls with loss and the sweep is order independent", "[analysis][property]") {
  SweepSpec spec;
  spec.protocol = SweepProtocol::w_standard_heralded;
  spec.values = {0.0, 100.0, 600.0, 1800.0};
  spec.max_threads = 1;
  const Trace serial = fidelity_sweep(spec);
  spec.max_threads = 4;
  const Trace parallel = fidelity_sweep(spec);
  CHECK(serial.series == parallel.series);
  CHECK(serial.x_label == "gamma_over_g");
  CHECK(non_increasing(serial.at("fidelity")));
  CHECK(serial.at("fidelity").front() == Catch::Approx(1.0).margin(1e-8));

  spec.protocol = SweepProtocol::pi_pulse;
  spec.parameter = SweepParameter::alpha_max;
  spec.gamma_over_g = 1800.0;
  spec.values = {1000.0, 2000.0, 4200.0, 8000.0};
  const Trace faster = fidelity_sweep(spec);
  // stronger drives outrun the loss
  CHECK(non_increasing(std::vector<double>(faster.at("fidelity").rbegin(), faster.at("fidelity").rend())));

  spec.parameter = SweepParameter::n;
  spec.values = {2.5};
  REQUIRE_THROWS_AS(fidelity_sweep(spec), ConfigError);
  spec.values.clear();
  REQUIRE_THROWS_AS(fidelity_sweep(spec), ConfigError);
}
