import cmath
import math

import numpy as np
import pytest

from sidesense.arrays import ArrayGeometry, sample_codebook, steering_vector
from sidesense.channel import (
    Channel,
    FrameCapture,
    PathComponent,
    Reflector,
    Scene,
    beam_gains,
    channel_from_dict,
    channel_matrix,
    channel_to_dict,
    effective_gain,
    scene_from_dict,
    scene_to_channel,
    scene_to_dict,
    transmit_frame,
)
from sidesense.waveform import QAM4, modulate


def make_two_path_channel(amp1=0.3 * cmath.exp(0.7j)):
    return Channel(
        los=PathComponent(0.0, 0.0, 1.0),
        nlos=(PathComponent(27.0, 14.0, amp1),),
    )


class TestSceneToChannel:
    def test_free_space_los(self):
        scene = Scene(tx_pos=(0, 0), rx_pos=(1.0, 0), carrier_wavelength_m=0.005)
        ch = scene_to_channel(scene)
        assert ch.nlos == ()
        assert ch.los.aoa_deg == pytest.approx(0.0, abs=1e-12)
        assert ch.los.aod_deg == pytest.approx(0.0, abs=1e-12)
        assert ch.los.amp == pytest.approx(0.005 / (4 * math.pi), abs=1e-15)
        assert ch.los.amp.imag == 0.0  # phase reference

    def test_perpendicular_bisector_reflector(self):
        # 3 m LOS, reflector 1.5 m off the midpoint: both angles at 45 degrees
        scene = Scene(
            tx_pos=(0, 0),
            rx_pos=(3.0, 0),
            reflectors=(Reflector(position=(1.5, 1.5), gamma=0.5),),
        )
        ch = scene_to_channel(scene)
        assert abs(ch.nlos[0].aod_deg) == pytest.approx(45.0, abs=1e-9)
        assert abs(ch.nlos[0].aoa_deg) == pytest.approx(45.0, abs=1e-9)

    def test_angles_against_trig_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            refl = (float(rng.uniform(0.5, 2.5)), float(rng.uniform(0.3, 2.0)))
            scene = Scene(
                tx_pos=(0, 0), rx_pos=(3.0, 0), reflectors=(Reflector(refl, 0.4),)
            )
            ch = scene_to_channel(scene)
            aod = math.degrees(math.atan2(refl[1], refl[0]))
            aoa = math.degrees(math.atan2(refl[1], refl[0] - 3.0)) - 180.0
            aoa = (aoa + 180.0) % 360.0 - 180.0
            assert ch.nlos[0].aod_deg == pytest.approx(aod, abs=1e-9)
            assert ch.nlos[0].aoa_deg == pytest.approx(aoa, abs=1e-9)

    def test_nlos_amplitude_model(self):
        lam = 0.005
        scene = Scene(
            tx_pos=(0, 0),
            rx_pos=(3.0, 0),
            reflectors=(Reflector(position=(1.5, 1.5), gamma=0.5 * cmath.exp(0.3j)),),
            carrier_wavelength_m=lam,
        )
        ch = scene_to_channel(scene)
        length = 2 * math.hypot(1.5, 1.5)
        expect = (
            0.5
            * cmath.exp(0.3j)
            * lam
            / (4 * math.pi * length)
            * cmath.exp(-2j * math.pi * length / lam)
        )
        assert ch.nlos[0].amp == pytest.approx(expect, abs=1e-18)

    def test_zero_reflection_keeps_path(self):
        scene = Scene(
            tx_pos=(0, 0), rx_pos=(3.0, 0), reflectors=(Reflector((1.5, 1.5), 0.0),)
        )
        ch = scene_to_channel(scene)
        assert len(ch.nlos) == 1
        assert ch.nlos[0].amp == 0.0

    def test_out_of_fov_names_reflector(self):
        scene = Scene(
            tx_pos=(0, 0), rx_pos=(3.0, 0), reflectors=(Reflector((-1.0, 0.5), 0.5),)
        )
        with pytest.raises(ValueError, match="reflector 0"):
            scene_to_channel(scene)


class TestEffectiveGain:
    def test_aligned_full_arrays(self):
        ch = Channel(los=PathComponent(0.0, 0.0, 1.0))
        tx_g, rx_g = ArrayGeometry(8), ArrayGeometry(16)
        w_t = steering_vector(tx_g, 0.0)
        w_r = steering_vector(rx_g, 0.0)
        gain = effective_gain(ch, w_t, w_r, tx_g, rx_g)
        assert gain == pytest.approx(8 * 16, abs=1e-9)

    def test_subset_receive_beam(self):
        ch = Channel(los=PathComponent(0.0, 0.0, 1.0))
        tx_g, rx_g = ArrayGeometry(8), ArrayGeometry(16)
        cb = sample_codebook(rx_g, 0.0, 12, 5, seed=1)
        from sidesense.arrays import make_weight_vector

        w_r = make_weight_vector(cb, 2)
        gain = effective_gain(ch, steering_vector(tx_g, 0.0), w_r, tx_g, rx_g)
        assert gain == pytest.approx(8 * 12, abs=1e-9)

    def test_matches_dense_matrix_oracle(self):
        rng = np.random.default_rng(11)
        tx_g, rx_g = ArrayGeometry(6, 0.57), ArrayGeometry(10)
        for _ in range(25):
            paths = [
                PathComponent(
                    float(rng.uniform(-80, 80)),
                    float(rng.uniform(-80, 80)),
                    complex(rng.normal(), rng.normal()),
                )
                for _ in range(3)
            ]
            ch = Channel(los=paths[0], nlos=tuple(paths[1:]))
            w_t = rng.normal(size=6) + 1j * rng.normal(size=6)
            w_r = rng.normal(size=10) + 1j * rng.normal(size=10)
            H = channel_matrix(ch, rx_g, tx_g)
            dense = np.vdot(w_r, H @ w_t)
            assert effective_gain(ch, w_t, w_r, tx_g, rx_g) == pytest.approx(dense, abs=1e-9)

    def test_length_mismatch(self):
        ch = Channel(los=PathComponent(0.0, 0.0, 1.0))
        with pytest.raises(ValueError):
            effective_gain(ch, np.ones(4), np.ones(16), ArrayGeometry(8), ArrayGeometry(16))


class TestTransmitFrame:
    def setup_method(self):
        self.rx_g = ArrayGeometry(16)
        self.tx_g = ArrayGeometry(1)
        self.cb = sample_codebook(self.rx_g, 0.0, 12, 21, seed=4)
        rng = np.random.default_rng(0)
        self.symbols = modulate(rng.integers(0, 2, 2 * 50 * 21), QAM4).reshape(50, 21)

    def test_noiseless_k0_exact(self):
        ch = Channel(los=PathComponent(0.0, 0.0, 0.5))
        cap = transmit_frame(ch, np.ones(1), self.cb, self.symbols, 0.0, 1, self.tx_g)
        expect = 0.5 * 12 * self.symbols
        assert np.allclose(cap.samples, expect, atol=1e-12)

    def test_noiseless_two_path_per_beam_oracle(self):
        amp1 = 0.2 * cmath.exp(1.1j)
        ch = make_two_path_channel(amp1)
        cap = transmit_frame(ch, np.ones(1), self.cb, self.symbols, 0.0, 1, self.tx_g)
        from sidesense.arrays import array_factor

        ratio = cap.samples / self.symbols
        for m in range(21):
            expect = 12.0 + amp1 * array_factor(self.cb, m, 27.0)
            assert np.allclose(ratio[:, m], expect, atol=1e-9)

    def test_same_seed_bit_identical(self):
        ch = make_two_path_channel()
        a = transmit_frame(ch, np.ones(1), self.cb, self.symbols, 0.3, 77, self.tx_g)
        b = transmit_frame(ch, np.ones(1), self.cb, self.symbols, 0.3, 77, self.tx_g)
        assert np.array_equal(a.samples, b.samples)

    def test_linearity_in_path_amplitudes(self):
        ch = make_two_path_channel()
        c = 0.7 - 1.3j
        a = transmit_frame(ch, np.ones(1), self.cb, self.symbols, 0.0, 1, self.tx_g)
        b = transmit_frame(ch.scaled(c), np.ones(1), self.cb, self.symbols, 0.0, 1, self.tx_g)
        assert np.allclose(b.samples, c * a.samples, rtol=1e-12)

    def test_dimension_mismatch(self):
        ch = make_two_path_channel()
        with pytest.raises(ValueError):
            transmit_frame(ch, np.ones(1), self.cb, self.symbols[:, :5], 0.0, 1, self.tx_g)

    def test_negative_noise_rejected(self):
        ch = make_two_path_channel()
        with pytest.raises(ValueError):
            transmit_frame(ch, np.ones(1), self.cb, self.symbols, -0.1, 1, self.tx_g)


class TestEmpiricalSnr:
    def test_matches_mainlobe_snr_model(self):
        """Measured SNR within 0.2 dB of alpha0 * Ntx^2 * L^2 / sigma^2."""
        rx_g, tx_g = ArrayGeometry(16), ArrayGeometry(4)
        cb = sample_codebook(rx_g, 0.0, 12, 40, seed=9)
        amp0 = 3.7e-4
        ch = Channel(los=PathComponent(0.0, 0.0, amp0))
        rng = np.random.default_rng(1)
        n_samples = 120_000
        symbols = modulate(rng.integers(0, 2, 2 * n_samples), QAM4).reshape(-1, 40)
        w_t = steering_vector(tx_g, 0.0)
        snr_target = 10 ** (12.0 / 10.0)
        sigma = math.sqrt(amp0**2 * (4 * 12) ** 2 / snr_target)
        noisy = transmit_frame(ch, w_t, cb, symbols, sigma, 5, tx_g)
        clean = transmit_frame(ch, w_t, cb, symbols, 0.0, 5, tx_g)
        sig_pow = np.mean(np.abs(clean.samples) ** 2)
        noise_pow = np.mean(np.abs(noisy.samples - clean.samples) ** 2)
        measured_db = 10 * math.log10(sig_pow / noise_pow)
        expected_db = 10 * math.log10(amp0**2 * (4 * 12) ** 2 / sigma**2)
        assert measured_db == pytest.approx(expected_db, abs=0.2)


class TestRoleSwap:
    def test_mirrored_conjugate_identity(self):
        """Codebook on the transmit side of the mirrored channel reproduces the
        receive-side gains, conjugated; magnitudes match exactly."""
        ch = Channel(
            los=PathComponent(0.0, 0.0, 1.0),
            nlos=(
                PathComponent(27.0, 14.0, 0.3 * cmath.exp(0.7j)),
                PathComponent(-33.0, -8.0, 0.2 * cmath.exp(-1.9j)),
            ),
        )
        rx_g, tx_g = ArrayGeometry(16), ArrayGeometry(4)
        cb = sample_codebook(rx_g, 0.0, 12, 30, seed=2)
        w_t = steering_vector(tx_g, 0.0)
        g_rx = beam_gains(ch, cb, w_t, tx_g, codebook_on_tx=False)
        g_tx = beam_gains(ch.mirrored(), cb, w_t, tx_g, codebook_on_tx=True)
        assert np.allclose(g_tx, g_rx.conj(), atol=1e-12)
        assert np.allclose(np.abs(g_tx), np.abs(g_rx), atol=1e-12)

    def test_noiseless_sample_magnitudes_identical(self):
        ch = make_two_path_channel()
        rx_g, tx_g = ArrayGeometry(16), ArrayGeometry(1)
        cb = sample_codebook(rx_g, 0.0, 12, 15, seed=6)
        rng = np.random.default_rng(0)
        symbols = modulate(rng.integers(0, 2, 2 * 30 * 15), QAM4).reshape(30, 15)
        y_rx = beam_gains(ch, cb, np.ones(1), tx_g)[None, :] * symbols
        y_tx = beam_gains(ch.mirrored(), cb, np.ones(1), tx_g, codebook_on_tx=True)[None, :] * symbols
        assert np.allclose(np.abs(y_tx), np.abs(y_rx), atol=1e-12)


class TestFrameCapture:
    def test_rejects_zero_symbols(self):
        cb = sample_codebook(ArrayGeometry(4), 0.0, 3, 2, seed=0)
        samples = np.ones((5, 2), complex)
        symbols = np.ones((5, 2), complex)
        symbols[2, 1] = 0.0
        with pytest.raises(ValueError):
            FrameCapture(samples, cb, symbols)

    def test_rejects_beam_mismatch(self):
        cb = sample_codebook(ArrayGeometry(4), 0.0, 3, 2, seed=0)
        with pytest.raises(ValueError):
            FrameCapture(np.ones((5, 3), complex), cb, np.ones((5, 3), complex))


class TestSerialization:
    def test_scene_round_trip(self):
        scene = Scene(
            tx_pos=(0, 0),
            rx_pos=(2.0, 0),
            reflectors=(Reflector((1.0, 1.2), 0.5 * cmath.exp(0.4j)),),
        )
        back = scene_from_dict(scene_to_dict(scene))
        assert back.tx_pos == scene.tx_pos
        assert back.reflectors[0].gamma == pytest.approx(scene.reflectors[0].gamma, abs=1e-15)

    def test_channel_round_trip(self):
        ch = make_two_path_channel()
        back = channel_from_dict(channel_to_dict(ch))
        assert back == ch

    def test_channel_dict_schema(self):
        doc = channel_to_dict(make_two_path_channel())
        assert set(doc) == {"paths"}
        assert set(doc["paths"][0]) == {"aoa_deg", "aod_deg", "amp_re", "amp_im"}
