#include "qdspin/pulses.hpp"

#include <algorithm>
#include <cmath>

#include "qdspin/errors.hpp"

namespace qdspin::pulses {

namespace {

constexpr double kPsPerS = 1e12;

// Snap a time to the fixed point of the s -> ps -> s conversion so the JSON
// manifest (times in ps) round-trips bit-exactly. One application suffices:
// the conversion map is idempotent on its image.
double snap_time(double t_s) { return (t_s * kPsPerS) / kPsPerS; }

double to_ps(double t_s) { return t_s * kPsPerS; }
double from_ps(double t_ps) { return t_ps / kPsPerS; }

}  // namespace

std::string to_string(Shape s) { return s == Shape::Gaussian ? "gaussian" : "sech"; }

Shape shape_from_string(const std::string& name) {
  if (name == "gaussian") return Shape::Gaussian;
  if (name == "sech") return Shape::Sech;
  throw DomainError("unknown pulse shape: " + name);
}

double Pulse::envelope(double t) const {
  const double x = t - center;
  if (shape == Shape::Gaussian) {
    // intensity FWHM -> field envelope sigma
    const double s = fwhm / (2.0 * std::sqrt(std::log(2.0)));
    return peak_rabi * std::exp(-0.5 * x * x / (s * s));
  }
  const double tau = fwhm / (2.0 * std::acosh(std::sqrt(2.0)));
  return peak_rabi / std::cosh(x / tau);
}

double Pulse::half_support() const {
  if (shape == Shape::Gaussian) {
    const double s = fwhm / (2.0 * std::sqrt(std::log(2.0)));
    return 5.0 * s;
  }
  const double tau = fwhm / (2.0 * std::acosh(std::sqrt(2.0)));
  return 8.0 * tau;
}

double event_start(const Event& e) {
  return std::visit([](const auto& x) {
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, Pulse>) return x.start();
    else return x.start;
  }, e);
}

double event_end(const Event& e) {
  return std::visit([](const auto& x) { return x.end(); }, e);
}

double Sequence::span() const {
  double t = 0.0;
  for (const auto& e : events) t = std::max(t, event_end(e));
  return t;
}

std::vector<Violation> validate(const Sequence& seq) {
  std::vector<Violation> out;
  const auto& ev = seq.events;

  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (const auto* p = std::get_if<Pulse>(&ev[i])) {
      if (p->fwhm <= 0.0) out.push_back({"value", "pulse fwhm must be > 0", i});
      if (p->peak_rabi < 0.0) out.push_back({"value", "pulse peak_rabi must be >= 0", i});
    } else {
      const auto& w = std::get<PumpWindow>(ev[i]);
      if (w.duration <= 0.0) out.push_back({"value", "pump duration must be > 0", i});
      if (w.pump_rabi < 0.0) out.push_back({"value", "pump rabi must be >= 0", i});
    }
  }

  for (std::size_t i = 1; i < ev.size(); ++i) {
    if (event_start(ev[i]) < event_start(ev[i - 1]))
      out.push_back({"order", "events not sorted by start time", i});
  }

  // rotation pulses may not overlap pump windows; pump windows may not
  // overlap each other
  for (std::size_t i = 0; i < ev.size(); ++i) {
    for (std::size_t j = i + 1; j < ev.size(); ++j) {
      const bool pi = std::holds_alternative<Pulse>(ev[i]);
      const bool pj = std::holds_alternative<Pulse>(ev[j]);
      if (pi && pj) continue;
      const double a0 = event_start(ev[i]), a1 = event_end(ev[i]);
      const double b0 = event_start(ev[j]), b1 = event_end(ev[j]);
      if (a0 < b1 && b0 < a1) {
        const char* msg = (pi || pj) ? "rotation pulse overlaps pump window"
                                     : "pump windows overlap";
        out.push_back({"overlap", msg, j});
      }
    }
  }

  const double limit = seq.period * static_cast<double>(seq.repetitions) * (1.0 + 1e-12);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (event_end(ev[i]) > limit || event_start(ev[i]) < 0.0)
      out.push_back({"bounds", "event outside period x repetitions", i});
  }
  return out;
}

double rotation_angle_from_power(double power, double cal) {
  if (power < 0.0) throw DomainError("rotation power must be >= 0");
  return cal * power;
}

Pulse Hardware::pulse_at_power(double power, double center) const {
  if (power < 0.0) throw DomainError("rotation power must be >= 0");
  Pulse p = pulse;
  p.center = snap_time(center);
  p.fwhm = snap_time(p.fwhm);
  // two-photon pulse area is linear in optical power, field scales as sqrt
  p.peak_rabi = pulse.peak_rabi * std::sqrt(power);
  return p;
}

namespace {

struct Builder {
  const Hardware& hw;
  Sequence seq;
  double cursor = 0.0;

  explicit Builder(const Hardware& hw_in) : hw(hw_in) { seq.period = snap_time(hw.period); }

  void pump(double detuning, bool readout) {
    PumpWindow w = hw.pump;
    w.start = snap_time(cursor);
    w.duration = snap_time(w.duration);
    w.detuning = detuning;
    w.readout = readout;
    seq.events.push_back(w);
    cursor = w.end() + hw.pad;
  }

  // place a pulse with its envelope support starting at the cursor
  double pulse(double power) {
    const double half = hw.pulse.half_support();
    Pulse p = hw.pulse_at_power(power, cursor + half);
    seq.events.push_back(p);
    cursor = p.end();
    return p.center;
  }

  void pulse_at(double power, double center) {
    Pulse p = hw.pulse_at_power(power, center);
    seq.events.push_back(p);
    cursor = std::max(cursor, p.end());
  }

  Sequence finish() {
    seq.repetitions = std::max<long>(1, static_cast<long>(std::ceil(seq.span() / seq.period)));
    return std::move(seq);
  }
};

}  // namespace

Sequence make_rabi(const Hardware& hw, double power) {
  Builder b(hw);
  b.pump(0.0, false);
  b.pulse(power);
  b.cursor += hw.pad;
  b.pump(0.0, true);
  return b.finish();
}

Sequence make_ramsey(const Hardware& hw, double tau, double theta) {
  if (tau < 0.0) throw SequenceError("ramsey delay must be >= 0");
  if (tau > hw.period) throw SequenceError("ramsey delay exceeds one laser period");
  const double power = hw.power_for_angle(theta);
  Builder b(hw);
  b.pump(0.0, false);
  const double c1 = b.pulse(power);
  b.pulse_at(power, c1 + tau);
  b.cursor += hw.pad;
  b.pump(0.0, true);
  return b.finish();
}

Sequence make_echo(const Hardware& hw, double total_delay_2t, double fine_delay) {
  if (total_delay_2t <= 0.0) throw SequenceError("echo delay must be > 0");
  if (total_delay_2t > 8192.0 * hw.period) throw SequenceError("echo delay exceeds sequence length");
  if (std::abs(fine_delay) > 0.25 * hw.period)
    throw SequenceError("echo fine delay too large");

  // pulse picking quantizes the coarse delay to the laser period
  const double coarse = std::max(1.0, std::round(total_delay_2t / hw.period)) * hw.period;
  const double p_half = hw.power_for_angle(std::numbers::pi / 2);
  const double p_pi = hw.power_for_angle(std::numbers::pi);

  Builder b(hw);
  b.pump(0.0, false);
  const double c1 = b.pulse(p_half);
  b.pulse_at(p_pi, c1 + 0.5 * coarse);
  b.pulse_at(p_half, c1 + coarse + fine_delay);
  b.cursor += hw.pad;
  b.pump(0.0, true);
  return b.finish();
}

Sequence make_bloch_map(const Hardware& hw, double theta, double tau) {
  if (tau < 0.0) throw SequenceError("delay must be >= 0");
  if (tau > hw.period) throw SequenceError("delay exceeds one laser period");
  const double power = hw.power_for_angle(theta);
  Builder b(hw);
  b.pump(0.0, false);
  if (power > 0.0) {
    const double c1 = b.pulse(power);
    b.pulse_at(power, c1 + tau);
  }
  b.cursor += hw.pad;
  b.pump(0.0, true);
  return b.finish();
}

Sequence make_pump_scan(const Hardware& hw, double pump_detuning) {
  Builder b(hw);
  b.pump(pump_detuning, false);
  b.pulse(hw.power_for_angle(std::numbers::pi));
  b.cursor += hw.pad;
  b.pump(pump_detuning, true);
  return b.finish();
}

nlohmann::json to_json(const Sequence& seq) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : seq.events) {
    if (const auto* p = std::get_if<Pulse>(&e)) {
      events.push_back({{"type", "pulse"},
                        {"center_ps", to_ps(p->center)},
                        {"fwhm_ps", to_ps(p->fwhm)},
                        {"detuning_rad_s", p->detuning},
                        {"peak_rabi_rad_s", p->peak_rabi},
                        {"polarization", levels::to_string(p->polarization)},
                        {"shape", to_string(p->shape)}});
    } else {
      const auto& w = std::get<PumpWindow>(e);
      events.push_back({{"type", "pump"},
                        {"start_ps", to_ps(w.start)},
                        {"duration_ps", to_ps(w.duration)},
                        {"pump_rabi_rad_s", w.pump_rabi},
                        {"detuning_rad_s", w.detuning},
                        {"target", w.target == PumpWindow::Target::UpViaTrionDown
                                       ? "up_via_trion_dn" : "dn_via_trion_up"},
                        {"readout", w.readout}});
    }
  }
  return {{"period_ps", to_ps(seq.period)},
          {"repetitions", seq.repetitions},
          {"events", events}};
}

Sequence sequence_from_json(const nlohmann::json& j) {
  Sequence seq;
  seq.period = from_ps(j.at("period_ps").get<double>());
  seq.repetitions = j.at("repetitions").get<long>();
  for (const auto& e : j.at("events")) {
    const std::string type = e.at("type").get<std::string>();
    if (type == "pulse") {
      Pulse p;
      p.center = from_ps(e.at("center_ps").get<double>());
      p.fwhm = from_ps(e.at("fwhm_ps").get<double>());
      p.detuning = e.at("detuning_rad_s").get<double>();
      p.peak_rabi = e.at("peak_rabi_rad_s").get<double>();
      p.polarization = levels::polarization_from_string(e.at("polarization").get<std::string>());
      p.shape = shape_from_string(e.at("shape").get<std::string>());
      seq.events.emplace_back(p);
    } else if (type == "pump") {
      PumpWindow w;
      w.start = from_ps(e.at("start_ps").get<double>());
      w.duration = from_ps(e.at("duration_ps").get<double>());
      w.pump_rabi = e.at("pump_rabi_rad_s").get<double>();
      w.detuning = e.at("detuning_rad_s").get<double>();
      w.target = e.at("target").get<std::string>() == "up_via_trion_dn"
                     ? PumpWindow::Target::UpViaTrionDown
                     : PumpWindow::Target::DownViaTrionUp;
      w.readout = e.at("readout").get<bool>();
      seq.events.emplace_back(w);
    } else {
      throw DomainError("unknown sequence event type: " + type);
    }
  }
  return seq;
}

}  // namespace qdspin::pulses
