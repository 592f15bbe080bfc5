"""Split-step propagation, EDFA, and link composition tests."""

import numpy as np
import pytest
from scipy.constants import c as c_light
from scipy.constants import h as h_planck
from scipy.integrate import quad

from pwlink.channel import (
    AmpParams,
    FiberParams,
    LinkSpec,
    amplify,
    propagate_link,
    propagate_span,
    span_rng,
)
from pwlink.constellation import build_qam
from pwlink.dsp import IqWaveform, RrcSpec, cd_compensate, matched_filter_downsample, rrc_shape
from pwlink.errors import BlowupError, ConfigError

RRC = RrcSpec(0.1, 64, 8)


def _wave(rng, n=4096, power=1e-3):
    x = (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))) * np.sqrt(power / 4)
    return IqWaveform(x.astype(np.complex128), 8e10, 1e10, 8)


def _shaped(rng, n=2048, power_dbm=0.0):
    a = build_qam(16)
    sym = a.points[rng.integers(0, 16, size=(2, n))]
    return sym, rrc_shape(sym, RRC, power_dbm, 1e10, dtype=np.complex128)


class TestFiberParams:
    def test_beta2_hand_computed(self):
        # -D * lambda^2 / (2 pi c) with D = 16e-6 s/m^2, lambda = 1550 nm.
        fiber = FiberParams(dispersion_ps_nm_km=16.0, wavelength_nm=1550.0)
        by_hand = -16e-6 * (1550e-9) ** 2 / (2 * np.pi * c_light) * 1e27
        assert by_hand == pytest.approx(-20.4072, abs=1e-3)
        assert fiber.beta2_ps2_km == pytest.approx(by_hand, rel=1e-12)

    def test_alpha_linear(self):
        fiber = FiberParams(alpha_db_per_km=0.2)
        assert fiber.alpha_lin_per_km == pytest.approx(0.2 * np.log(10) / 10, rel=1e-12)

    def test_effective_length_by_quadrature(self):
        fiber = FiberParams(alpha_db_per_km=0.2, length_km=80.0)
        l_eff, _ = quad(lambda z: np.exp(-fiber.alpha_lin_per_km * z), 0.0, 80.0)
        assert l_eff == pytest.approx(21.1693, abs=1e-3)
        assert fiber.effective_length_km == pytest.approx(l_eff, rel=1e-10)

    def test_bad_model_rejected(self):
        with pytest.raises(ConfigError):
            FiberParams(polarization_model="vector")


class TestPropagateSpan:
    def test_linear_lossless_is_all_pass(self, rng):
        wave = _wave(rng)
        fiber = FiberParams(0.0, 16.0, 0.0, 80.0)
        out = propagate_span(wave, fiber, 1.0)
        mag_in = np.abs(np.fft.fft(wave.samples, axis=-1))
        mag_out = np.abs(np.fft.fft(out.samples, axis=-1))
        assert np.max(np.abs(mag_out - mag_in)) < 1e-12 * mag_in.max()

    def test_cw_spm_lossless(self):
        # Closed-form single-polarization SPM: (8/9)*gamma*P*L.
        p0 = 1e-3
        cw = np.zeros((2, 1024), dtype=np.complex128)
        cw[0] = np.sqrt(p0)
        wave = IqWaveform(cw, 8e10, 1e10, 8)
        fiber = FiberParams(0.0, 0.0, 1.4, 80.0)
        out = propagate_span(wave, fiber, 0.5)
        phase = np.angle(out.samples[0, 0] * np.conj(wave.samples[0, 0]))
        assert (8 / 9) * 1.4 * 1e-3 * 80 == pytest.approx(0.0996, abs=2e-4)
        assert phase == pytest.approx((8 / 9) * 1.4 * p0 * 80, rel=1e-9)

    def test_cw_spm_with_loss_matches_effective_length(self):
        p0 = 1e-3
        cw = np.zeros((2, 1024), dtype=np.complex128)
        cw[0] = np.sqrt(p0)
        wave = IqWaveform(cw, 8e10, 1e10, 8)
        fiber = FiberParams(0.2, 0.0, 1.4, 80.0)
        out = propagate_span(wave, fiber, 0.5)
        phase = np.angle(out.samples[0, 0] * np.conj(wave.samples[0, 0]))
        l_eff, _ = quad(lambda z: np.exp(-fiber.alpha_lin_per_km * z), 0.0, 80.0)
        assert phase == pytest.approx((8 / 9) * 1.4 * p0 * l_eff, rel=1e-9)

    def test_scalar_model_ignores_other_pol(self):
        p0 = 2e-3
        cw = np.full((2, 512), np.sqrt(p0), dtype=np.complex128)
        wave = IqWaveform(cw, 8e10, 1e10, 8)
        fiber = FiberParams(0.0, 0.0, 1.4, 10.0, polarization_model="scalar")
        out = propagate_span(wave, fiber, 1.0)
        phase = np.angle(out.samples[0, 0] * np.conj(wave.samples[0, 0]))
        assert phase == pytest.approx(1.4 * p0 * 10, rel=1e-9)  # own power only, factor 1

    def test_partial_final_step(self, rng):
        wave = _wave(rng, n=2048)
        fiber = FiberParams(0.2, 16.0, 1.4, 1.3)
        out = propagate_span(wave, fiber, 0.5)  # steps 0.5, 0.5, 0.3
        loss = np.exp(-fiber.alpha_lin_per_km * 1.3)
        assert out.mean_power() == pytest.approx(wave.mean_power() * loss, rel=1e-9)

    def test_blowup_detection(self, rng):
        wave = _wave(rng)
        bad = wave.with_samples(wave.samples * np.inf)
        fiber = FiberParams(0.2, 16.0, 1.4, 10.0)
        with pytest.raises(BlowupError, match="step 0"):
            propagate_span(bad, fiber, 1.0)

    def test_undersampled_rejected(self, rng):
        wave = IqWaveform(_wave(rng).samples, 2e10, 1e10, 2)
        with pytest.raises(ConfigError):
            propagate_span(wave, FiberParams(), 1.0)


class TestAmplify:
    def test_unity_gain_with_ase_is_identity(self, rng):
        wave = _wave(rng)
        out = amplify(wave, AmpParams(0.0, 5.5, True), rng)
        assert np.array_equal(out.samples, wave.samples)

    def test_pure_gain(self, rng):
        wave = _wave(rng)
        out = amplify(wave, AmpParams(16.0, 5.5, False), rng)
        assert out.mean_power() == pytest.approx(wave.mean_power() * 10**1.6, rel=1e-12)

    def test_ase_psd_value(self):
        # n_sp = 10^0.55 / 2, G = 10^1.6, h*nu at 1550 nm.
        amp = AmpParams(16.0, 5.5, True)
        nu = c_light / 1550e-9
        assert h_planck * nu == pytest.approx(1.281e-19, abs=2e-22)
        expected = (10**0.55 / 2) * h_planck * nu * (10**1.6 - 1)
        assert expected == pytest.approx(8.82e-18, abs=2e-20)
        assert amp.ase_psd(nu) == pytest.approx(expected, rel=1e-12)

    def test_measured_noise_variance(self):
        amp = AmpParams(16.0, 5.5, True)
        zeros = IqWaveform(np.zeros((2, 500_000), dtype=np.complex128), 8e10, 1e10, 8)
        out = amplify(zeros, amp, np.random.default_rng(99), 1550.0)
        var = np.mean(np.abs(out.samples) ** 2)
        expected = amp.ase_psd(c_light / 1550e-9) * 8e10
        assert var == pytest.approx(expected, rel=0.01)

    def test_negative_gain_rejected(self):
        with pytest.raises(ConfigError):
            AmpParams(-1.0, 5.5)


class TestPropagateLink:
    def test_dum_linear_invertible(self, rng):
        sym, wave = _shaped(rng)
        fiber = FiberParams(0.2, 16.0, 0.0, 80.0)
        link = LinkSpec(fiber, AmpParams(16.0, 5.5, False), 15, False, 1.0)
        out = propagate_link(wave, link, seed=1)
        back = cd_compensate(out, fiber.beta2_ps2_km, 1200.0)
        rx = matched_filter_downsample(back, RRC)
        g = np.sum(rx * np.conj(sym)) / np.sum(np.abs(sym) ** 2)
        err = np.sqrt(np.mean(np.abs(rx / g - sym) ** 2))
        assert err < 1e-6

    def test_dm_linear_needs_no_receiver_cd(self, rng):
        sym, wave = _shaped(rng)
        fiber = FiberParams(0.2, 16.0, 0.0, 80.0)
        link = LinkSpec(fiber, AmpParams(16.0, 5.5, False), 5, True, 1.0)
        out = propagate_link(wave, link, seed=1)
        err = np.sqrt(np.mean(np.abs(out.samples - wave.samples) ** 2))
        assert err / np.sqrt(np.mean(np.abs(wave.samples) ** 2)) < 1e-9

    def test_lossless_energy_conservation(self, rng):
        _, wave = _shaped(rng, power_dbm=3.0)
        fiber = FiberParams(0.0, 16.0, 1.4, 80.0)
        link = LinkSpec(fiber, AmpParams(0.0, 5.5, True), 3, False, 0.5)
        out = propagate_link(wave, link, seed=1)
        assert out.mean_power() == pytest.approx(wave.mean_power(), rel=1e-9)

    def test_loss_gain_bookkeeping(self, rng):
        _, wave = _shaped(rng)
        fiber = FiberParams(0.2, 16.0, 1.4, 80.0)
        link = LinkSpec(fiber, AmpParams(16.0, 5.5, False), 4, False, 1.0)
        out = propagate_link(wave, link, seed=1)
        assert out.mean_power() == pytest.approx(wave.mean_power(), rel=1e-9)

    def test_determinism(self, rng):
        _, wave = _shaped(rng, n=512)
        link = LinkSpec(FiberParams(), AmpParams(), 2, True, 1.0)
        a = propagate_link(wave, link, seed=(7, 3))
        b = propagate_link(wave, link, seed=(7, 3))
        assert np.array_equal(a.samples, b.samples)

    def test_span_rng_independent_of_order(self):
        a = span_rng((5, 1), 3).standard_normal(4)
        _ = span_rng((5, 1), 0).standard_normal(100)
        b = span_rng((5, 1), 3).standard_normal(4)
        assert np.array_equal(a, b)


def test_convergence_step_halving_field(rng):
    _, wave = _shaped(rng, power_dbm=0.0)
    fiber = FiberParams(0.2, 16.0, 1.4, 80.0)
    full = propagate_span(wave, fiber, 1.0)
    half = propagate_span(wave, fiber, 0.5)
    rel = np.sqrt(np.mean(np.abs(full.samples - half.samples) ** 2)) / np.sqrt(
        np.mean(np.abs(full.samples) ** 2)
    )
    assert rel < 1e-4
