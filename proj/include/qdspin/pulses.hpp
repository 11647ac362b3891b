#pragma once

#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "qdspin/levels.hpp"
#include "qdspin/units.hpp"

namespace qdspin::pulses {

using levels::Polarization;

enum class Shape { Gaussian, Sech };

std::string to_string(Shape s);
Shape shape_from_string(const std::string& name);

// Picosecond rotation pulse. fwhm is the intensity FWHM; the field envelope
// Omega(t) is wider by sqrt(2) in the Gaussian case.
struct Pulse {
  double center = 0.0;                          // s
  double fwhm = 3.67e-12;                       // s
  double detuning = units::ghz_to_rad(340.0);   // rad/s
  double peak_rabi = 0.0;                       // Omega_0, rad/s
  Polarization polarization = Polarization::SigmaPlus;
  Shape shape = Shape::Gaussian;

  double envelope(double t) const;  // Omega(t), rad/s
  double half_support() const;      // envelope support half-width
  double start() const { return center - half_support(); }
  double end() const { return center + half_support(); }
};

// Narrowband CW initialization/readout window, resonant with one Lambda leg
// up to `detuning`. Rise/fall treated as instantaneous.
struct PumpWindow {
  double start = 0.0;
  double duration = 26e-9;   // s
  double pump_rabi = 0.0;    // Omega_p, rad/s
  double detuning = 0.0;     // rad/s offset from the driven leg
  // which leg is driven resonantly; the default pumps |up> via trion-dn
  enum class Target { UpViaTrionDown, DownViaTrionUp };
  Target target = Target::UpViaTrionDown;
  bool readout = false;      // photon counting gated on this window

  double end() const { return start + duration; }
};

using Event = std::variant<Pulse, PumpWindow>;

double event_start(const Event& e);
double event_end(const Event& e);

// One experimental shot: time-ordered optical events on the pulsed-laser
// clock. Delays longer than one period are realized by pulse picking, so
// events may span several periods; `repetitions` is the shot count the
// timeline occupies.
struct Sequence {
  double period = 13e-9;  // s, laser repetition period
  long repetitions = 1;
  std::vector<Event> events;

  double span() const;  // time of the last event edge
};

struct Violation {
  std::string code;     // "order", "overlap", "bounds", "value"
  std::string message;
  std::size_t index = 0;
};

// Diagnostics are returned, never thrown.
std::vector<Violation> validate(const Sequence& seq);

// theta = cal * power; linear in optical power for a fixed pulse shape.
double rotation_angle_from_power(double power, double cal);

// Shared hardware description used by the sequence builders.
struct Hardware {
  Pulse pulse;              // prototype; peak_rabi holds Omega_0 at unit power
  PumpWindow pump;          // prototype init/readout window
  double period = 13e-9;    // s
  double pad = 1e-9;        // s, guard between pump edges and pulses
  double angle_per_power = std::numbers::pi;  // cal coefficient, rad per unit power

  double power_for_angle(double theta) const { return theta / angle_per_power; }
  Pulse pulse_at_power(double power, double center) const;
};

Sequence make_rabi(const Hardware& hw, double power);
Sequence make_ramsey(const Hardware& hw, double tau, double theta = std::numbers::pi / 2);
Sequence make_echo(const Hardware& hw, double total_delay_2t, double fine_delay);
Sequence make_bloch_map(const Hardware& hw, double theta, double tau);
Sequence make_pump_scan(const Hardware& hw, double pump_detuning);

nlohmann::json to_json(const Sequence& seq);
Sequence sequence_from_json(const nlohmann::json& j);

}  // namespace qdspin::pulses
