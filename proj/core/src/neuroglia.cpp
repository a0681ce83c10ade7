// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/neuroglia.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "astroseq/errors.hpp"

namespace astroseq::neuroglia {
namespace {

double raw(Nonlinearity f, double x) noexcept {
  switch (f) {
    case Nonlinearity::tanh: return std::tanh(x);
    case Nonlinearity::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Nonlinearity::linear: return x;
  }
  return x;
}

void check_finite(const Matrix& m, const char* name) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) throw NumericalOverflow(name, "Euler update produced " + std::to_string(v));
  }
}

void check_finite(const std::vector<double>& xs, const char* name) {
  for (double v : xs) {
    if (!std::isfinite(v)) throw NumericalOverflow(name, "Euler update produced " + std::to_string(v));
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("parameter '" + key + "': not a number: '" + value + "'");
  }
}

}  // namespace

double activate(Nonlinearity f, double x) noexcept { return raw(f, x) - raw(f, 0.0); }

Nonlinearity parse_nonlinearity(std::string_view name) {
  if (name == "tanh") return Nonlinearity::tanh;
  if (name == "sigmoid") return Nonlinearity::sigmoid;
  if (name == "linear") return Nonlinearity::linear;
  throw InvalidArgument("unknown nonlinearity '" + std::string(name) + "'");
}

std::string to_string(Nonlinearity f) {
  switch (f) {
    case Nonlinearity::tanh: return "tanh";
    case Nonlinearity::sigmoid: return "sigmoid";
    case Nonlinearity::linear: return "linear";
  }
  return "?";
}

CouplingSource parse_coupling_source(std::string_view name) {
  if (name == "synaptic") return CouplingSource::synaptic;
  if (name == "process") return CouplingSource::process;
  throw InvalidArgument("unknown coupling source '" + std::string(name) + "'");
}

std::string to_string(CouplingSource s) {
  return s == CouplingSource::synaptic ? "synaptic" : "process";
}

SynapseGeometry build_geometry(long long n_neurons, double spacing) {
  if (n_neurons < 1) throw InvalidArgument("build_geometry: n_neurons must be >= 1");
  if (!(spacing > 0.0)) throw InvalidArgument("build_geometry: spacing must be > 0");
  const auto n = static_cast<std::size_t>(n_neurons);
  SynapseGeometry g;
  g.n_neurons = n;
  g.neuron_positions.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.neuron_positions[i] = spacing * static_cast<double>(i);
  g.synapse_midpoints = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g.synapse_midpoints(i, j) = 0.5 * (g.neuron_positions[i] + g.neuron_positions[j]);
  const std::size_t n2 = n * n;
  g.pairwise_distances = Matrix(n2, n2);
  auto mid = g.synapse_midpoints.data();
  for (std::size_t a = 0; a < n2; ++a)
    for (std::size_t b = 0; b < n2; ++b) g.pairwise_distances(a, b) = std::abs(mid[a] - mid[b]);
  return g;
}

CouplingTensor coupling_tensor(const SynapseGeometry& geometry, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("coupling_tensor: scale must be > 0");
  CouplingTensor t;
  t.scale = scale;
  t.values = Matrix(geometry.pairwise_distances.rows(), geometry.pairwise_distances.cols());
  auto src = geometry.pairwise_distances.data();
  auto dst = t.values.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::exp(-src[i] * scale);
  return t;
}

void SimParams::validate() const {
  for (auto [name, v] : {std::pair{"tau_n", tau_n}, {"tau_s", tau_s}, {"tau_p_s", tau_p_s},
                         {"tau_p_l", tau_p_l}, {"dt", dt}}) {
    if (!(v > 0.0)) throw InvalidArgument(std::string(name) + " must be > 0");
  }
  if (!(dt < std::min({tau_n, tau_s, tau_p_s, tau_p_l}))) {
    throw InvalidArgument("dt must be smaller than every time constant");
  }
  if (!(tau_p_l > tau_p_s)) throw InvalidArgument("tau_p_l must exceed tau_p_s");
  if (!(V_th > V_reset)) throw InvalidArgument("V_th must exceed V_reset");
}

std::size_t drive_spike_count(std::uint64_t step_index, double dt, double rate_hz) noexcept {
  if (!(rate_hz > 0.0)) return 0;
  // spike times are k / rate; count those in [k dt, (k+1) dt). The small
  // offset keeps exact multiples (e.g. 0.1 s at dt = 0.04 s * 2.5) stable.
  const double lo = static_cast<double>(step_index) * dt * rate_hz;
  const double hi = static_cast<double>(step_index + 1) * dt * rate_hz;
  const auto first = static_cast<long long>(std::ceil(lo - 1e-9));
  const auto last = static_cast<long long>(std::ceil(hi - 1e-9));
  return static_cast<std::size_t>(std::max(0LL, last - first));
}

SimState initial_state(std::size_t n_neurons, const SimParams& params) {
  SimState s;
  s.V.assign(n_neurons, params.V_reset);
  s.rate.assign(n_neurons, 0.0);
  s.spiked.assign(n_neurons, false);
  s.s = Matrix(n_neurons, n_neurons);
  s.p_s = Matrix(n_neurons, n_neurons);
  s.p_l = Matrix(n_neurons, n_neurons);
  return s;
}

SimState step(const SimState& state, const SimParams& params, const CouplingTensor& coupling,
              std::span<const double> spikes_in) {
  const std::size_t n = state.n_neurons();
  const std::size_t n2 = n * n;
  if (spikes_in.size() != n) throw ShapeError("step: spikes_in has wrong length");
  if (coupling.values.rows() != n2 || coupling.values.cols() != n2) {
    throw ShapeError("step: coupling tensor is " + coupling.values.shape_string() + ", expected " +
                     std::to_string(n2) + "x" + std::to_string(n2));
  }
  for (double sp : spikes_in) {
    if (sp != 0.0 && sp != 1.0) throw InvalidArgument("step: spikes_in must be binary");
  }

  const double dt = params.dt;
  SimState next;
  next.t = state.t + dt;
  next.step_index = state.step_index + 1;

  // activity proxy x = tanh(rate estimate), same timestep for pre and post
  std::vector<double> theta_x(n);
  for (std::size_t i = 0; i < n; ++i) theta_x[i] = activate(params.theta, std::tanh(state.rate[i]));

  // membrane: tau_n dV/dt = -lambda (V - V_reset) + sum_j g(s_ij) S_j + b, with
  // each presynaptic spike a delta impulse of weight g(s_ij)
  next.V.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double impulse = 0.0;
    for (std::size_t j = 0; j < n; ++j) impulse += activate(params.g_syn, state.s(i, j)) * spikes_in[j];
    next.V[i] = state.V[i] + dt / params.tau_n * (-params.lambda * (state.V[i] - params.V_reset) + params.b) +
                impulse / params.tau_n;
  }
  check_finite(next.V, "V");

  // synaptic facilitation
  next.s = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double drive = theta_x[i] * theta_x[j] + activate(params.psi, state.p_s(i, j)) + params.c;
      next.s(i, j) = state.s(i, j) + dt / params.tau_s * (-params.beta * state.s(i, j) + drive);
    }
  }
  check_finite(next.s, "s");

  // short-term astrocyte process with spatial coupling
  const Matrix& source = params.coupling_source == CouplingSource::synaptic ? state.s : state.p_s;
  std::vector<double> psi_src(n2);
  for (std::size_t k = 0; k < n2; ++k) psi_src[k] = activate(params.psi, source.data()[k]);
  next.p_s = Matrix(n, n);
  for (std::size_t a = 0; a < n2; ++a) {
    double flux = 0.0;
    auto row = coupling.values.row(a);
    for (std::size_t b = 0; b < n2; ++b) flux += row[b] * psi_src[b];
    const double p = state.p_s.data()[a];
    next.p_s.data()[a] = p + dt / params.tau_p_s * (-params.gamma_s * p + flux + params.d);
  }
  check_finite(next.p_s, "p_s");

  // long-term astrocyte process
  next.p_l = Matrix(n, n);
  for (std::size_t a = 0; a < n2; ++a) {
    const double p = state.p_l.data()[a];
    next.p_l.data()[a] =
        p + dt / params.tau_p_l * (-params.gamma_l * p + activate(params.kappa, state.s.data()[a]));
  }
  check_finite(next.p_l, "p_l");

  next.spiked.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (next.V[i] >= params.V_th) {
      next.spiked[i] = true;
      next.V[i] = params.V_reset;
    }
  }

  next.rate.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double events = spikes_in[i] + (next.spiked[i] ? 1.0 : 0.0);
    next.rate[i] = state.rate[i] + (events - dt * state.rate[i]) / params.tau_n;
  }
  check_finite(next.rate, "rate");
  return next;
}

double SimTrace::mean_p_l(std::size_t sample) const {
  const auto& snap = p_l_series.at(sample);
  double s = 0.0;
  for (double v : snap) s += v;
  return s / static_cast<double>(snap.size());
}

SimTrace run_stp_cycles(const SimParams& params, const SynapseGeometry& geometry, double scale,
                        long long n_cycles, double cycle_duration, const DriveSpec& drive) {
  params.validate();
  if (n_cycles < 1) throw InvalidArgument("run_stp_cycles: n_cycles must be >= 1");
  if (!(cycle_duration > 0.0)) throw InvalidArgument("run_stp_cycles: cycle_duration must be > 0");
  if (drive.rate_hz < 0.0) throw InvalidArgument("run_stp_cycles: drive rate must be >= 0");
  const double ratio = cycle_duration / params.dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw InvalidArgument("run_stp_cycles: cycle_duration must be a multiple of dt");
  }
  const auto steps_per_cycle = static_cast<std::size_t>(rounded);
  const CouplingTensor coupling = coupling_tensor(geometry, scale);
  const std::size_t n = geometry.n_neurons;

  SimTrace trace;
  trace.n_neurons = n;
  const std::size_t total = steps_per_cycle * static_cast<std::size_t>(n_cycles) + 1;
  trace.times.reserve(total);
  trace.s_series.reserve(total);
  trace.p_s_series.reserve(total);
  trace.p_l_series.reserve(total);

  auto record = [&](const SimState& st, double t) {
    trace.times.push_back(t);
    trace.s_series.emplace_back(st.s.data().begin(), st.s.data().end());
    trace.p_s_series.emplace_back(st.p_s.data().begin(), st.p_s.data().end());
    trace.p_l_series.emplace_back(st.p_l.data().begin(), st.p_l.data().end());
  };

  SimState state = initial_state(n, params);
  record(state, 0.0);
  trace.cycle_boundaries.push_back(0);
  std::vector<double> spikes(n);
  std::uint64_t global_step = 0;
  for (long long cycle = 0; cycle < n_cycles; ++cycle) {
    if (cycle > 0) {
      SimState fresh = initial_state(n, params);
      fresh.p_l = state.p_l;
      fresh.t = state.t;
      fresh.step_index = state.step_index;
      state = std::move(fresh);
    }
    for (std::size_t k = 0; k < steps_per_cycle; ++k, ++global_step) {
      const double count = drive_spike_count(global_step, params.dt, drive.rate_hz) > 0 ? 1.0 : 0.0;
      std::fill(spikes.begin(), spikes.end(), count);
      state = step(state, params, coupling, spikes);
      // times from the integer step counter so they never drift
      record(state, static_cast<double>(global_step + 1) * params.dt);
    }
    trace.cycle_boundaries.push_back(trace.samples() - 1);
  }
  return trace;
}

MacroSpec parse_macro_spec(std::string_view text, MacroSpec base) {
  MacroSpec spec = base;
  SimParams& p = spec.params;
  std::map<std::string, double*> reals = {
      {"tau_n", &p.tau_n},     {"tau_s", &p.tau_s},     {"tau_p_s", &p.tau_p_s},
      {"tau_p_l", &p.tau_p_l}, {"lambda", &p.lambda},   {"beta", &p.beta},
      {"gamma_s", &p.gamma_s}, {"gamma_l", &p.gamma_l}, {"V_th", &p.V_th},
      {"V_reset", &p.V_reset}, {"b", &p.b},             {"c", &p.c},
      {"d", &p.d},             {"dt", &p.dt},           {"spacing", &spec.spacing},
      {"scale", &spec.scale},  {"cycle_seconds", &spec.cycle_seconds},
      {"drive_hz", &spec.drive.rate_hz}};
  std::map<std::string, Nonlinearity*> fns = {
      {"theta", &p.theta}, {"psi", &p.psi}, {"kappa", &p.kappa}, {"g", &p.g_syn}};

  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("params line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (auto it = reals.find(key); it != reals.end()) {
      *it->second = parse_double(key, value);
    } else if (auto f = fns.find(key); f != fns.end()) {
      *f->second = parse_nonlinearity(value);
    } else if (key == "coupling_source") {
      p.coupling_source = parse_coupling_source(value);
    } else if (key == "neurons") {
      const double v = parse_double(key, value);
      if (v < 1 || v != std::floor(v)) throw InvalidArgument("neurons must be a positive integer");
      spec.neurons = static_cast<std::size_t>(v);
    } else {
      throw InvalidArgument("params line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return spec;
}

MacroSpec load_macro_spec(const std::string& path, MacroSpec base) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot open params file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_macro_spec(ss.str(), base);
}

std::string to_text(const MacroSpec& spec) {
  const SimParams& p = spec.params;
  std::ostringstream out;
  auto kv = [&](const char* k, const std::string& v) { out << k << " = " << v << "\n"; };
  kv("tau_n", fmt_double(p.tau_n));
  kv("tau_s", fmt_double(p.tau_s));
  kv("tau_p_s", fmt_double(p.tau_p_s));
  kv("tau_p_l", fmt_double(p.tau_p_l));
  kv("lambda", fmt_double(p.lambda));
  kv("beta", fmt_double(p.beta));
  kv("gamma_s", fmt_double(p.gamma_s));
  kv("gamma_l", fmt_double(p.gamma_l));
  kv("V_th", fmt_double(p.V_th));
  kv("V_reset", fmt_double(p.V_reset));
  kv("b", fmt_double(p.b));
  kv("c", fmt_double(p.c));
  kv("d", fmt_double(p.d));
  kv("dt", fmt_double(p.dt));
  kv("theta", to_string(p.theta));
  kv("psi", to_string(p.psi));
  kv("kappa", to_string(p.kappa));
  kv("g", to_string(p.g_syn));
  kv("coupling_source", to_string(p.coupling_source));
  kv("neurons", std::to_string(spec.neurons));
  kv("spacing", fmt_double(spec.spacing));
  kv("scale", fmt_double(spec.scale));
  kv("cycle_seconds", fmt_double(spec.cycle_seconds));
  kv("drive_hz", fmt_double(spec.drive.rate_hz));
  return out.str();
}

}  // namespace astroseq::neuroglia
