// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "astroseq/matrix.hpp"

/// Forward-Euler simulation of a tripartite-synapse network: LIF neurons,
/// synaptic facilitation s, and short/long-term astrocyte processes p_s, p_l,
/// with spatially decaying coupling between astrocyte processes.
///
/// Synapse (i, j) connects postsynaptic neuron i to presynaptic neuron j; all
/// N x N matrices are indexed that way and flattened row-major (i * N + j).
namespace astroseq::neuroglia {

struct SynapseGeometry {
  std::size_t n_neurons = 0;
  std::vector<double> neuron_positions;
  /// N x N, entry (i, j) = midpoint of neurons i and j.
  Matrix synapse_midpoints;
  /// N^2 x N^2 Euclidean distances between synapse midpoints.
  Matrix pairwise_distances;

  std::size_t synapse_index(std::size_t i, std::size_t j) const noexcept { return i * n_neurons + j; }
};

/// Neurons on a line at 0, spacing, 2 * spacing, ...
SynapseGeometry build_geometry(long long n_neurons, double spacing);

struct CouplingTensor {
  /// N^2 x N^2, entry (a, b) = exp(-distance_ab * scale).
  Matrix values;
  double scale = 0.0;
};

CouplingTensor coupling_tensor(const SynapseGeometry& geometry, double scale);

enum class Nonlinearity { tanh, sigmoid, linear };

/// What the coupling sum of the p_s equation integrates over neighbouring
/// synapses: psi(s_kl) (synaptic) or psi(p_s_kl) (process).
enum class CouplingSource { synaptic, process };

/// Zero-centred evaluation f(x) - f(0), so every selector maps 0 to 0.
double activate(Nonlinearity f, double x) noexcept;
Nonlinearity parse_nonlinearity(std::string_view name);
std::string to_string(Nonlinearity f);
CouplingSource parse_coupling_source(std::string_view name);
std::string to_string(CouplingSource s);

struct SimParams {
  double tau_n = 0.5;     // s
  double tau_s = 0.75;    // s
  double tau_p_s = 1.0;   // s
  double tau_p_l = 6.0;   // s
  double lambda = 0.2;
  double beta = 0.25;
  double gamma_s = 0.2;
  double gamma_l = 0.1;
  double V_th = 1.0;      // mV
  double V_reset = -1.0;  // mV
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double dt = 0.04;       // s
  Nonlinearity theta = Nonlinearity::tanh;
  Nonlinearity psi = Nonlinearity::tanh;
  Nonlinearity kappa = Nonlinearity::sigmoid;
  Nonlinearity g_syn = Nonlinearity::linear;
  CouplingSource coupling_source = CouplingSource::synaptic;

  /// Throws InvalidArgument when a time constant or dt is non-positive, dt is
  /// not below every time constant, or tau_p_l <= tau_p_s.
  void validate() const;

  friend bool operator==(const SimParams&, const SimParams&) = default;
};

/// Regular presynaptic spiking applied to every neuron. rate_hz = 0 is the
/// zero-drive case.
struct DriveSpec {
  double rate_hz = 10.0;

  friend bool operator==(const DriveSpec&, const DriveSpec&) = default;
};

/// Number of drive spikes falling in step k, i.e. in [k dt, (k + 1) dt).
std::size_t drive_spike_count(std::uint64_t step_index, double dt, double rate_hz) noexcept;

struct SimState {
  std::vector<double> V;
  /// Exponential moving average of each neuron's spike rate (Hz), tau_n.
  std::vector<double> rate;
  std::vector<bool> spiked;
  Matrix s;
  Matrix p_s;
  Matrix p_l;
  double t = 0.0;
  std::uint64_t step_index = 0;

  std::size_t n_neurons() const noexcept { return V.size(); }
};

/// V = V_reset, everything else zero.
SimState initial_state(std::size_t n_neurons, const SimParams& params);

/// One Euler step. spikes_in holds the presynaptic drive for each neuron
/// (0 or 1). Neurons reaching V_th after the update spike and reset.
SimState step(const SimState& state, const SimParams& params, const CouplingTensor& coupling,
              std::span<const double> spikes_in);

struct SimTrace {
  std::size_t n_neurons = 0;
  std::vector<double> times;
  /// One flattened N x N snapshot per sample.
  std::vector<std::vector<double>> s_series;
  std::vector<std::vector<double>> p_s_series;
  std::vector<std::vector<double>> p_l_series;
  /// Sample indices at the end of each cycle; entry 0 is the initial sample.
  std::vector<std::size_t> cycle_boundaries;

  std::size_t samples() const noexcept { return times.size(); }
  double mean_p_l(std::size_t sample) const;
};

/// Simulates n_cycles back-to-back cycles of cycle_duration seconds. At each
/// boundary V, s, p_s and the rate estimate return to their initial values
/// while p_l carries over. Sample 0 is the initial state; every step adds one.
SimTrace run_stp_cycles(const SimParams& params, const SynapseGeometry& geometry, double scale,
                        long long n_cycles, double cycle_duration, const DriveSpec& drive);

/// Everything needed to reproduce one LTP macro-model run.
struct MacroSpec {
  SimParams params;
  DriveSpec drive;
  std::size_t neurons = 3;
  double spacing = 1.0;
  double scale = 2.0;
  double cycle_seconds = 50.0;

  friend bool operator==(const MacroSpec&, const MacroSpec&) = default;
};

/// Flat key=value text ('#' comments). Unknown keys are rejected.
MacroSpec parse_macro_spec(std::string_view text, MacroSpec base = {});
MacroSpec load_macro_spec(const std::string& path, MacroSpec base = {});
/// Canonical text form; parse_macro_spec(to_text(m)) == m.
std::string to_text(const MacroSpec& spec);

}  // namespace astroseq::neuroglia
