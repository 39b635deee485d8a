#ifndef HMMSENSE_H
#define HMMSENSE_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum HmsPolarization {
  HMS_POLARIZATION_P = 0,
  HMS_POLARIZATION_S = 1,
} HmsPolarization;

typedef enum HmsStatus {
  HMS_STATUS_OK = 0,
  HMS_STATUS_NULL_POINTER = 1,
  HMS_STATUS_INVALID_UTF8 = 2,
  HMS_STATUS_INVALID_ARGUMENT = 3,
  HMS_STATUS_CONFIG = 4,
  HMS_STATUS_NUMERICAL = 5,
  HMS_STATUS_PANIC = 6,
} HmsStatus;

/**
 * Opaque stack handle.
 */
typedef struct HmsStack HmsStack;

typedef struct HmsCoupledModes {
  double omega_plus_re;
  double omega_plus_im;
  double omega_minus_re;
  double omega_minus_im;
  double g;
  /**
   * 1 for strong coupling, 0 for weak.
   */
  int32_t strong;
  double margin;
  double splitting_mev;
} HmsCoupledModes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *hms_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hms_version(void);

/**
 * Builds a stack from a JSON job configuration. `base_dir` resolves
 * relative table paths and may be null for the current directory.
 *
 * # Safety
 * `config_json` and a non-null `base_dir` must be NUL-terminated strings;
 * `out` must be valid for writes.
 */
enum HmsStatus hms_stack_from_config_json(const char *config_json,
                                          const char *base_dir,
                                          struct HmsStack **out);

/**
 * Releases a stack. Null is ignored.
 *
 * # Safety
 * `stack` must come from [`hms_stack_from_config_json`] and not be used
 * afterwards.
 */
void hms_stack_free(struct HmsStack *stack);

/**
 * Sets the concentration [mol/l] of the stack's sensing dye.
 *
 * # Safety
 * `stack` must be a live handle not used concurrently.
 */
enum HmsStatus hms_stack_set_concentration(struct HmsStack *stack, double molar);

/**
 * Reflectance at one wavelength [nm] and angle [deg].
 *
 * # Safety
 * `stack` must be a live handle, `out` valid for writes.
 */
enum HmsStatus hms_reflectance(const struct HmsStack *stack,
                               double lambda_nm,
                               double theta_deg,
                               enum HmsPolarization pol,
                               double *out);

/**
 * Reflectance at `n` wavelengths [nm] and one angle [deg], written to `out`.
 *
 * # Safety
 * `lambda_nm` must hold `n` values and `out` room for `n` values.
 */
enum HmsStatus hms_reflectance_spectrum(const struct HmsStack *stack,
                                        const double *lambda_nm,
                                        size_t n,
                                        double theta_deg,
                                        enum HmsPolarization pol,
                                        double *out);

/**
 * ENZ and ENP wavelengths [nm] of the stack's first EMT layer.
 *
 * # Safety
 * `stack` must be a live handle; `enz_nm` and `enp_nm` valid for writes.
 */
enum HmsStatus hms_band_edges(const struct HmsStack *stack,
                              double lo_nm,
                              double hi_nm,
                              double resolution_nm,
                              double *enz_nm,
                              double *enp_nm);

/**
 * Collective plasma frequency [rad/s] of a dye at `molar` with oscillator
 * strength factor `h`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum HmsStatus hms_dye_plasma_frequency(double molar, double h, double *out);

/**
 * Near-resonance coupled-mode frequencies. All rates in rad/s.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum HmsStatus hms_coupled_modes(double omega_0,
                                 double gamma_vac,
                                 double omega_c,
                                 double kappa_c,
                                 double g,
                                 struct HmsCoupledModes *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HMMSENSE_H */
