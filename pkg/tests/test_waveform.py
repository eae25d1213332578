import math

import numpy as np
import pytest

from sidesense.waveform import (
    PAM4,
    QAM4,
    QAM16,
    Packet,
    bit_error_rate,
    demodulate,
    estimate_equalizer,
    get_scheme,
    modulate,
    random_bits,
)

ALL_SCHEMES = [PAM4, QAM4, QAM16]


def bits_of_index(idx, k):
    return [(idx >> (k - 1 - j)) & 1 for j in range(k)]


class TestConstellations:
    @pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=lambda s: s.kind)
    def test_unit_average_energy(self, scheme):
        assert np.mean(np.abs(scheme.constellation) ** 2) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=lambda s: s.kind)
    def test_gray_adjacency(self, scheme):
        """Nearest-neighbour constellation points differ in exactly one bit."""
        pts = scheme.constellation
        k = scheme.bits_per_symbol
        dists = np.abs(pts[:, None] - pts[None, :])
        np.fill_diagonal(dists, np.inf)
        dmin = dists.min()
        for i in range(len(pts)):
            for j in range(len(pts)):
                if i != j and dists[i, j] < dmin * (1 + 1e-9):
                    diff = [a != b for a, b in zip(bits_of_index(i, k), bits_of_index(j, k))]
                    assert sum(diff) == 1, f"{scheme.kind}: {i:0{k}b} vs {j:0{k}b}"

    def test_qam4_points(self):
        # labels 00, 01, 11, 10 map onto (+,+), (+,-), (-,-), (-,+) over sqrt(2)
        expect = np.array([1 + 1j, 1 - 1j, -1 - 1j, -1 + 1j]) / math.sqrt(2)
        assert np.allclose(QAM4.constellation[[0, 1, 3, 2]], expect, atol=1e-15)

    def test_pam4_levels(self):
        assert np.allclose(
            sorted(PAM4.constellation.real), np.array([-3, -1, 1, 3]) / math.sqrt(5), atol=1e-15
        )
        assert np.allclose(PAM4.constellation.imag, 0.0)

    def test_get_scheme(self):
        assert get_scheme("QAM16") is QAM16
        with pytest.raises(ValueError):
            get_scheme("qam64")


class TestModulate:
    @pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=lambda s: s.kind)
    def test_round_trip_identity(self, scheme):
        rng = np.random.default_rng(1)
        bits = random_bits(rng, 10_000 * scheme.bits_per_symbol)
        symbols = modulate(bits, scheme)
        back, decisions = demodulate(symbols, 1.0, scheme)
        assert np.array_equal(back, bits)
        assert np.allclose(decisions, symbols)

    def test_bijective(self):
        for scheme in ALL_SCHEMES:
            k = scheme.bits_per_symbol
            all_bits = np.array(
                [b for i in range(2**k) for b in bits_of_index(i, k)], dtype=np.uint8
            )
            symbols = modulate(all_bits, scheme)
            assert len(set(np.round(symbols, 12))) == 2**k

    def test_ragged_bit_count(self):
        with pytest.raises(ValueError):
            modulate([0, 1, 0], QAM16)

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError):
            modulate([0, 2], QAM4)


class TestEqualizer:
    def test_exact_complex_gain(self):
        rng = np.random.default_rng(2)
        s = modulate(random_bits(rng, 64), QAM4)
        g = 3.0 * np.exp(1j * np.pi / 4)
        assert estimate_equalizer(g * s, s) == pytest.approx(g, abs=1e-12)

    def test_single_symbol(self):
        assert estimate_equalizer([2.0 + 2j], [1.0 + 0j]) == pytest.approx(2 + 2j)

    def test_pure_noise_small_magnitude(self):
        """With zero gain the estimate is noise-limited: |g| < 3 sigma / sqrt(P)
        in at least 99 percent of draws (the exceedance rate is exp(-9))."""
        rng = np.random.default_rng(3)
        P, sigma = 32, 0.5
        s = modulate(random_bits(rng, 2 * P), QAM4)
        bound = 3 * sigma / math.sqrt(P)
        hits = 0
        reps = 2000
        for _ in range(reps):
            noise = (rng.standard_normal(P) + 1j * rng.standard_normal(P)) * sigma / math.sqrt(2)
            if abs(estimate_equalizer(noise, s)) < bound:
                hits += 1
        assert hits / reps >= 0.99

    def test_zero_preamble_rejected(self):
        with pytest.raises(ValueError):
            estimate_equalizer([1.0, 1.0], [0.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            estimate_equalizer([1.0], [1.0, 1.0])


class TestDemodulate:
    def test_scaled_boundary_recovers_compressive_gain(self):
        """Equalizer trained on the full-array gain, payload under a 12-of-16 beam."""
        rng = np.random.default_rng(4)
        bits = random_bits(rng, 20_000)
        s = modulate(bits, QAM16)
        g_full = 16 * 2.3 * np.exp(0.4j)
        g_partial = 12 * 2.3 * np.exp(0.4j)
        back, _ = demodulate(g_partial * s, g_full, QAM16, scale=12 / 16)
        assert bit_error_rate(bits, back) == 0.0

    def test_wrong_scale_breaks_pam4(self):
        # doubling the boundary maps the outer levels onto inner decision cells
        rng = np.random.default_rng(5)
        bits = random_bits(rng, 4000)
        s = modulate(bits, PAM4)
        back, _ = demodulate(s, 1.0, PAM4, scale=2.0)
        assert bit_error_rate(bits, back) > 0.2

    def test_qam4_tolerates_phase_offset_below_45deg(self):
        rng = np.random.default_rng(6)
        bits = random_bits(rng, 4000)
        s = modulate(bits, QAM4)
        for phi in (0.1, 0.4, 0.7):
            back, _ = demodulate(s * np.exp(1j * phi), 1.0, QAM4)
            expected_errors = 0 if phi < math.pi / 4 else 1
            assert (bit_error_rate(bits, back) > 0) == bool(expected_errors)

    def test_common_complex_factor_cancels(self):
        rng = np.random.default_rng(7)
        bits = random_bits(rng, 2000)
        s = modulate(bits, QAM4)
        g = 1.7 * np.exp(1.2j)
        y = g * s
        a, _ = demodulate(y, g, QAM4)
        c = 0.3 - 2.1j
        b, _ = demodulate(c * y, c * g, QAM4)
        assert np.array_equal(a, b)

    def test_zero_gain_rejected(self):
        with pytest.raises(ValueError):
            demodulate([1.0 + 0j], 0.0, QAM4)

    def test_tie_breaks_to_smallest_label(self):
        # exactly between the two innermost PAM4 levels
        mid = 0.0 + 0.0j
        bits, decisions = demodulate([mid], 1.0, PAM4)
        # labels 01 (-1) and 11 (+1) tie; 01 is lexicographically smaller
        assert list(bits) == [0, 1]


class TestBitErrorRate:
    def test_identical(self):
        assert bit_error_rate([0, 1, 1], [0, 1, 1]) == 0.0

    def test_complement(self):
        assert bit_error_rate([0, 1, 0], [1, 0, 1]) == 1.0

    def test_single_flip(self):
        a = np.zeros(100, dtype=np.uint8)
        b = a.copy()
        b[17] = 1
        assert bit_error_rate(a, b) == pytest.approx(0.01)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            bit_error_rate([0, 1], [0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            bit_error_rate([], [])


class TestPacket:
    def test_payload_multiple_of_symbol_bits(self):
        with pytest.raises(ValueError):
            Packet(preamble=np.ones(4, complex), payload_bits=np.zeros(3), scheme=QAM16)

    def test_empty_preamble_rejected(self):
        with pytest.raises(ValueError):
            Packet(preamble=np.empty(0, complex), payload_bits=np.zeros(4), scheme=QAM4)


class TestBerMonotoneInSnr:
    def test_noisier_is_worse(self):
        """BER statistically non-increasing in SNR; one inversion within two
        binomial standard errors is tolerated."""
        rng = np.random.default_rng(8)
        n_bits = 100_000
        for scheme in ALL_SCHEMES:
            bits = random_bits(rng, n_bits - n_bits % scheme.bits_per_symbol)
            s = modulate(bits, scheme)
            bers, ses = [], []
            for snr_db in (0, 5, 10, 15, 20):
                sigma = math.sqrt(10 ** (-snr_db / 10))
                noise = (rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size)) * (
                    sigma / math.sqrt(2)
                )
                back, _ = demodulate(s + noise, 1.0, scheme)
                ber = bit_error_rate(bits, back)
                bers.append(ber)
                ses.append(math.sqrt(max(ber, 1e-9) * (1 - ber) / len(bits)))
            inversions = 0
            for i in range(len(bers) - 1):
                slack = 2 * math.hypot(ses[i], ses[i + 1])
                if bers[i + 1] > bers[i] + slack:
                    inversions += 1
            assert inversions == 0, f"{scheme.kind}: {bers}"
            assert bers[0] > bers[-1], f"{scheme.kind} shows no SNR benefit"
