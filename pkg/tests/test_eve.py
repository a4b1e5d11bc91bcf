"""Eavesdropper strategies and the empirical security evaluation."""

import json
import math

import numpy as np
import pytest

from diqkdlab import devices, eve as eve_mod, protocol, transcript
from diqkdlab.protocol import ProtocolParams


def null_params(**overrides):
    defaults = dict(m=4000, eps=1e-6, eta=0.01, gamma=0.5)
    defaults.update(overrides)
    return ProtocolParams(**defaults)


class TestTranscriptEve:
    def test_honest_devices_leave_even_odds(self):
        ev = eve_mod.transcript_eve()
        report = eve_mod.evaluate_security(
            lambda rng: devices.honest_pair(0.0, rng), ev, null_params(),
            trials=60, rng=np.random.default_rng(1),
        )
        assert report.guessed_bits > 5000
        sigma = math.sqrt(0.25 / report.guessed_bits)
        assert abs(report.per_bit_guess_rate - 0.5) <= 3 * sigma

    def test_input_determined_devices_are_fully_guessed(self):
        # With the test threshold effectively disabled (huge eta), a
        # deterministic pair survives -- and its raw key is a function of
        # the announced inputs, which the ML guesser learns exactly.
        ev = eve_mod.transcript_eve()
        report = eve_mod.evaluate_security(
            lambda rng: devices.deterministic_pair((0, 1, 1), (1, 0)),
            ev, null_params(eta=0.9), trials=10, rng=np.random.default_rng(2),
        )
        assert report.abort_rate == 0.0
        assert report.per_bit_guess_rate == 1.0

    def test_aborted_sessions_contribute_nothing(self):
        ev = eve_mod.transcript_eve()
        report = eve_mod.evaluate_security(
            lambda rng: devices.deterministic_pair((0, 0, 0), (0, 0)),
            ev, null_params(eta=0.005), trials=10, rng=np.random.default_rng(3),
        )
        assert report.abort_rate == 1.0
        assert report.per_bit_guess_rate is None
        assert report.mean_key_len == 0.0

    def test_final_key_guess_uses_published_seed(self):
        # When Eve somehow knows the raw key (deterministic devices with
        # the test disabled), hashing her guess with the published seed
        # reproduces the final key bit for bit.
        ev = eve_mod.transcript_eve()
        params = null_params(eta=0.9)
        params.kappa = 0.9  # force a nonempty key at this tiny scale
        hits = 0
        sessions = 0
        for k in range(5):
            # fa(2) == fb(1): the raw keys agree, so reconciliation is
            # cheap enough to leave room for a key.
            pair = devices.deterministic_pair((0, 1, 1), (0, 1))
            ev.session_start()
            res = protocol.run_session(pair, ev, params, np.random.default_rng(50 + k))
            if res.aborted or res.alice_key.size == 0:
                continue
            sessions += 1
            ev.guess_raw_key(res.raw_positions)
            guess = ev.guess_final_key(res.alice_key.size)
            hits += np.array_equal(guess, res.alice_key)
        assert sessions > 0
        assert hits == sessions


class TestInterfaceSecrecy:
    def test_eve_sees_only_message_objects(self):
        seen = []

        class Probe(eve_mod.EveStrategy):
            def observe(self, message):
                seen.append(message)
                super().observe(message)

            def guess_raw_key(self, positions):
                self._last_raw_guess = np.zeros(np.asarray(positions).size, dtype=np.uint8)
                return self._last_raw_guess

        pair = devices.honest_pair(0.0, np.random.default_rng(4))
        protocol.run_session(pair, Probe(), null_params(), np.random.default_rng(5))
        assert seen
        assert all(isinstance(m, transcript.Message) for m in seen)
        assert all(set(vars(m)) == {"sender", "seq", "payload"} for m in seen)

    def test_guesses_survive_poisoned_private_fields(self):
        # Eve's guessing path must not dereference the session's private
        # arrays: poison them after the run and guess afterwards.
        ev = eve_mod.transcript_eve()
        pair = devices.honest_pair(0.0, np.random.default_rng(6))
        ev.session_start()
        res = protocol.run_session(pair, ev, null_params(), np.random.default_rng(7))
        assert not res.aborted
        raw_pos = res.raw_positions.copy()
        truth_b = res.b.copy()
        res.a = None
        res.b = None
        guess = ev.guess_raw_key(raw_pos)
        final = ev.guess_final_key(16)
        assert guess.size == raw_pos.size
        assert final.size == 16
        assert truth_b is not None  # the evaluator, not Eve, holds the truth


class TestCovertDecoder:
    def test_matched_tape_decodes_secret(self):
        tape = b"matched-tape-0001"
        secret = np.random.default_rng(8).integers(0, 2, 24).tolist()
        decoder = eve_mod.covert_decoder_eve(tape, 0.05, 24)
        params = null_params(m=20000, eta=0.2, gamma=0.2)
        hits = total = 0
        for k in range(6):
            pair = devices.covert_channel_pair(secret, 0.05, np.random.default_rng(80 + k), tape=tape)
            decoder.session_start()
            res = protocol.run_session(pair, decoder, params, np.random.default_rng(90 + k))
            assert not res.aborted  # eta = 0.2 tolerates the tampering
            decoded = decoder.decode_secret()
            hits += int((decoded == np.asarray(secret)).sum())
            total += len(secret)
        assert hits / total >= 0.9

    def test_mismatched_tape_decodes_at_chance(self):
        tape = b"matched-tape-0001"
        wrong = b"wrong-tape-999999"
        rng = np.random.default_rng(9)
        decoder = eve_mod.covert_decoder_eve(wrong, 0.05, 24)
        params = null_params(m=20000, eta=0.2, gamma=0.2)
        hits = total = 0
        for k in range(12):
            secret = rng.integers(0, 2, 24).tolist()  # fresh secret per session
            pair = devices.covert_channel_pair(secret, 0.05, np.random.default_rng(180 + k), tape=tape)
            decoder.session_start()
            protocol.run_session(pair, decoder, params, np.random.default_rng(190 + k))
            decoded = decoder.decode_secret()
            hits += int((decoded == np.asarray(secret)).sum())
            total += len(secret)
        sigma = math.sqrt(0.25 / total)
        assert abs(hits / total - 0.5) <= 4 * sigma

    def test_high_flip_rate_aborts_at_protocol_eta(self):
        tape = b"abort-run-tape"
        secret = [1, 0] * 12
        params = null_params(m=4000, eta=0.005, gamma=0.5)
        report = eve_mod.evaluate_security(
            lambda rng: devices.covert_channel_pair(secret, 0.05, rng, tape=tape),
            None, params, trials=40, rng=np.random.default_rng(10),
        )
        assert report.abort_rate >= 0.99

    def test_low_flip_rate_tradeoff_regression(self):
        # flip rate below the test's resolution: most sessions survive,
        # and the decoder still reads the slots that land in the test
        # set. Frozen from a calibration run at these exact seeds.
        tape = b"calibration-tape"
        secret = [1, 0] * 8
        params = null_params(m=8000, eta=0.005, gamma=0.5)
        decoder = eve_mod.covert_decoder_eve(tape, 0.001, 16)
        aborts = hits = total = 0
        trials = 30
        for k in range(trials):
            pair = devices.covert_channel_pair(secret, 0.001, np.random.default_rng(300 + k), tape=tape)
            decoder.session_start()
            res = protocol.run_session(pair, decoder, params, np.random.default_rng(400 + k))
            aborts += res.aborted
            decoded = decoder.decode_secret()
            hits += int((decoded == np.asarray(secret)).sum())
            total += len(secret)
        # Frozen calibration values at these exact seeds: the tampering
        # sits below the test's resolution (abort rate 0.2, not ~1) while
        # the decoder reads the slots announced in the test set; with 16
        # slots per session spread over 16 secret bits most bits go
        # unobserved, capping accuracy well below the matched case.
        assert aborts / trials == pytest.approx(0.2, abs=1e-12)
        assert hits / total == pytest.approx(0.6, abs=1e-12)


class TestEvaluateSecurity:
    def test_single_trial_no_crash(self):
        report = eve_mod.evaluate_security(
            lambda rng: devices.honest_pair(0.0, rng), eve_mod.transcript_eve(),
            null_params(), trials=1, rng=np.random.default_rng(11),
        )
        assert report.sessions == 1
        assert set(report.confidence) >= {"abort_rate"}
        lo, hi = report.confidence["abort_rate"]
        assert 0.0 <= lo <= hi <= 1.0

    def test_reports_reproducible_bit_exactly(self):
        def run():
            report = eve_mod.evaluate_security(
                lambda rng: devices.honest_pair(0.002, rng), eve_mod.transcript_eve(),
                null_params(), trials=20, rng=np.random.default_rng(12),
            )
            return json.dumps(report.to_json_obj(), sort_keys=True)

        assert run() == run()

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            eve_mod.evaluate_security(
                lambda rng: devices.honest_pair(0.0, rng), None,
                null_params(), trials=0, rng=np.random.default_rng(13),
            )

    def test_report_json_fields(self):
        report = eve_mod.evaluate_security(
            lambda rng: devices.honest_pair(0.0, rng), None,
            null_params(), trials=3, rng=np.random.default_rng(14),
        )
        obj = report.to_json_obj()
        assert set(obj) == {
            "sessions", "abort_rate", "mean_key_len", "per_bit_guess_rate",
            "final_key_guess_advantage", "confidence", "non_aborted", "guessed_bits",
        }
