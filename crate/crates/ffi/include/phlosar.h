#ifndef PHLOSAR_H
#define PHLOSAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>
#include <stddef.h>

// Result of every fallible call.
typedef enum PhlosarStatus {
  PHLOSAR_STATUS_OK = 0,
  PHLOSAR_STATUS_NULL_POINTER = 1,
  PHLOSAR_STATUS_INVALID_INPUT = 2,
  PHLOSAR_STATUS_JSON = 3,
  PHLOSAR_STATUS_DIVERGENCE = 4,
  PHLOSAR_STATUS_BELOW_VACUUM = 5,
  PHLOSAR_STATUS_ANALYSIS = 6,
  PHLOSAR_STATUS_NO_FEASIBLE_DESIGN = 7,
  PHLOSAR_STATUS_IO = 8,
  PHLOSAR_STATUS_INVALID_UTF8 = 9,
  PHLOSAR_STATUS_BUFFER_TOO_SMALL = 10,
  PHLOSAR_STATUS_PANIC = 99,
} PhlosarStatus;

// Columns of a time series.
typedef enum PhlosarColumn {
  PHLOSAR_COLUMN_TIME = 0,
  PHLOSAR_COLUMN_PRESSURE_COMMAND = 1,
  PHLOSAR_COLUMN_PRESSURE_CONTROL_VOLUME = 2,
  PHLOSAR_COLUMN_PRESSURE_RESERVOIR = 3,
  PHLOSAR_COLUMN_INFLATION_VALVE = 4,
  PHLOSAR_COLUMN_VENTURI_VALVE = 5,
  PHLOSAR_COLUMN_SOLENOID = 6,
  PHLOSAR_COLUMN_FLOW_IN = 7,
  PHLOSAR_COLUMN_FLOW_OUT = 8,
  PHLOSAR_COLUMN_FLOW_MOTIVE = 9,
  // Cumulative standard liters drawn from the supply.
  PHLOSAR_COLUMN_SUPPLIED = 10,
  // Cumulative standard liters exhausted to atmosphere.
  PHLOSAR_COLUMN_VENTED = 11,
} PhlosarColumn;

// Parsed and validated scenario.
typedef struct PhlosarScenario PhlosarScenario;

// Simulation output.
typedef struct PhlosarTimeSeries PhlosarTimeSeries;

// Standard-condition gas properties.
typedef struct PhlosarGas {
  // kg/m³.
  double rho;
  // J/(mol·K).
  double r_universal;
  // K.
  double temperature;
  // kg/mol.
  double molar_mass;
} PhlosarGas;

typedef struct PhlosarDischargeFit {
  // s.
  double tau;
  // kPa.
  double p_r0_fit;
  double nrmse;
} PhlosarDischargeFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into this library from the same thread.
const char *phlosar_last_error(void);

// Library version as a static NUL-terminated string.
const char *phlosar_version(void);

// Dry air at 20 °C.
struct PhlosarGas phlosar_gas_default(void);

// Ideal-gas coefficient converting standard flow into pressure rate, kPa.
//
// # Safety
// `out` must be valid for a write of one `double`.
enum PhlosarStatus phlosar_alpha(struct PhlosarGas g, double *out);

// Reservoir pressure after `t` s of discharge through `r_v`, kPa gauge.
//
// # Safety
// `out` must be valid for a write of one `double`.
enum PhlosarStatus phlosar_discharge_pressure(double t,
                                              double p_r0,
                                              double r_v,
                                              double v_r,
                                              struct PhlosarGas g,
                                              double *out);

// Control-volume inflation rate with the reservoir at `p_r`, kPa/s.
//
// # Safety
// `out` must be valid for a write of one `double`.
enum PhlosarStatus phlosar_inflation_rate(double p_r,
                                          double r_v,
                                          double v_cv,
                                          struct PhlosarGas g,
                                          double *out);

// Peak slope of a sine of amplitude `a` kPa at `omega` Hz, kPa/s.
//
// # Safety
// `out` must be valid for a write of one `double`.
enum PhlosarStatus phlosar_max_command_rate(double a, double omega, double *out);

// Cutoff frequency for a slew limit `pdot_max` and amplitude `a`, Hz.
//
// # Safety
// `out` must be valid for a write of one `double`.
enum PhlosarStatus phlosar_cutoff_frequency(double pdot_max, double a, double *out);

// # Safety
// `out` must be valid for a write of one `double`.
enum PhlosarStatus phlosar_frequency_gain(double omega, double omega_c, double *out);

// Reservoir pressure needed to inflate at `pdot_d` kPa/s, kPa gauge.
//
// # Safety
// `out` must be valid for a write of one `double`.
enum PhlosarStatus phlosar_min_reservoir_pressure(double pdot_d,
                                                  double r_v,
                                                  double v_cv,
                                                  struct PhlosarGas g,
                                                  double *out);

// Inflation–deflation cycles available from a full reservoir (real-valued).
//
// # Safety
// `out` must be valid for a write of one `double`.
enum PhlosarStatus phlosar_n_cycles(double p_r0,
                                    double v_cv,
                                    double r_vmin,
                                    double pdot_d,
                                    double v_r,
                                    double dp_cv,
                                    struct PhlosarGas g,
                                    double *out);

// Parses a scenario document (the same JSON accepted by the command-line
// tool) and stores a new handle in `*out`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for a write.
enum PhlosarStatus phlosar_scenario_from_json(const char *json, struct PhlosarScenario **out);

// # Safety
// `scn` must be null or a handle from [`phlosar_scenario_from_json`] not yet freed.
void phlosar_scenario_free(struct PhlosarScenario *scn);

// Runs the scenario and stores a new time-series handle in `*out`.
//
// # Safety
// `scn` must be a live scenario handle; `out` must be valid for a write.
enum PhlosarStatus phlosar_simulate(const struct PhlosarScenario *scn,
                                    struct PhlosarTimeSeries **out);

// # Safety
// `ts` must be null or a handle from [`phlosar_simulate`] not yet freed.
void phlosar_timeseries_free(struct PhlosarTimeSeries *ts);

// Number of samples, 0 for a null handle.
//
// # Safety
// `ts` must be null or a live time-series handle.
size_t phlosar_timeseries_len(const struct PhlosarTimeSeries *ts);

// Copies one column (a `PhlosarColumn` value) into `buf`, which must hold at
// least [`phlosar_timeseries_len`] values.
//
// # Safety
// `ts` must be a live handle; `buf` must be valid for `cap` writes.
enum PhlosarStatus phlosar_timeseries_column(const struct PhlosarTimeSeries *ts,
                                             int column,
                                             double *buf,
                                             size_t cap);

// Controller mode per sample as a NUL-terminated name (`"PID"`,
// `"ON_OFF_INFLATE"`, ...). Null when out of range. Static storage.
//
// # Safety
// `ts` must be null or a live handle.
const char *phlosar_timeseries_mode(const struct PhlosarTimeSeries *ts, size_t index);

// Renders the time series as CSV into a new string in `*out`; release it
// with [`phlosar_string_free`].
//
// # Safety
// `ts` must be a live handle; `out` must be valid for a write.
enum PhlosarStatus phlosar_timeseries_csv(const struct PhlosarTimeSeries *ts, char **out);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void phlosar_string_free(char *s);

// Relative air-mass imbalance of a run.
//
// # Safety
// Both handles must be live and `ts` must come from simulating `scn`.
enum PhlosarStatus phlosar_mass_balance(const struct PhlosarScenario *scn,
                                        const struct PhlosarTimeSeries *ts,
                                        double *out);

// Log-linear fit of an exponential decay to `n` paired samples.
//
// # Safety
// `t` and `p` must each be valid for `n` reads; `out` for one write.
enum PhlosarStatus phlosar_fit_discharge(const double *t,
                                         const double *p,
                                         size_t n,
                                         struct PhlosarDischargeFit *out);

// Gain of the `omega` component of a uniformly sampled response relative to
// amplitude `a`.
//
// # Safety
// `response` must be valid for `n` reads; `out` for one write.
enum PhlosarStatus phlosar_single_bin_gain(const double *response,
                                           size_t n,
                                           double omega,
                                           double a,
                                           double sample_rate,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHLOSAR_H */
