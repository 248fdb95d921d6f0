import socket
import threading

import numpy as np
import pytest

from risran import e2
from risran.core import Slice, SchedulingPolicy
from risran.e2 import (ControlAck, ControlRequest, E2Message, FrameBuffer, FrameLengthError,
                       Indication, KpmCollector, MsgType, SchedXApp, Subscription,
                       SubscriptionResponse, TruncatedFrameError, UnknownMessageTypeError,
                       apply_control, decode, encode, xapp_pair_at)
from risran.metrics import KpmRecord

POLICIES = list(SchedulingPolicy)
SLICES = list(Slice)


def random_record(rng):
    return KpmRecord(
        timestamp_ms=int(rng.integers(0, 2 ** 40)), ue_id=int(rng.integers(0, 2 ** 16)),
        slice=SLICES[int(rng.integers(0, 2))], throughput_bps=int(rng.integers(0, 2 ** 40)),
        buffer_bytes=int(rng.integers(0, 2 ** 40)), cqi=int(rng.integers(0, 16)),
        mcs=int(rng.integers(0, 29)), granted_prbs=int(rng.integers(0, 51)),
        requested_prbs=int(rng.integers(0, 2 ** 20)))


def random_message(rng):
    corr = int(rng.integers(0, 2 ** 32))
    kind = int(rng.integers(0, 5))
    if kind == 0:
        flt = None if rng.integers(0, 2) else SLICES[int(rng.integers(0, 2))]
        return E2Message(MsgType.SUB_REQ, corr,
                         Subscription(int(rng.integers(1, 10_000)), flt))
    if kind == 1:
        return E2Message(MsgType.SUB_RESP, corr, SubscriptionResponse(bool(rng.integers(0, 2))))
    if kind == 2:
        records = tuple(random_record(rng) for _ in range(int(rng.integers(0, 6))))
        return E2Message(MsgType.INDICATION, corr, Indication(records))
    if kind == 3:
        return E2Message(MsgType.CONTROL_REQ, corr, ControlRequest({
            Slice.EMBB: POLICIES[int(rng.integers(0, 3))],
            Slice.URLLC: POLICIES[int(rng.integers(0, 3))]}))
    return E2Message(MsgType.CONTROL_ACK, corr, ControlAck(bool(rng.integers(0, 2))))


class TestCodec:
    def test_round_trip_all_types(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            msg = random_message(rng)
            assert decode(encode(msg)) == msg

    def test_control_req_frame_layout(self):
        msg = E2Message(MsgType.CONTROL_REQ, 7, ControlRequest({
            Slice.EMBB: SchedulingPolicy.WF, Slice.URLLC: SchedulingPolicy.RR}))
        assert encode(msg) == bytes.fromhex("00000002040000000701" "00")

    def test_truncated_header(self):
        with pytest.raises(TruncatedFrameError):
            decode(b"\x00\x00")

    def test_length_exceeding_available_bytes(self):
        frame = bytearray(encode(E2Message(MsgType.SUB_RESP, 1, SubscriptionResponse(True))))
        frame[3] += 4  # announce more payload than present
        with pytest.raises(TruncatedFrameError):
            decode(bytes(frame))

    def test_trailing_bytes_rejected(self):
        frame = encode(E2Message(MsgType.SUB_RESP, 1, SubscriptionResponse(True)))
        with pytest.raises(FrameLengthError):
            decode(frame + b"\x00")

    def test_unknown_msg_type(self):
        frame = bytearray(encode(E2Message(MsgType.SUB_RESP, 1, SubscriptionResponse(True))))
        frame[4] = 0x7F
        with pytest.raises(UnknownMessageTypeError):
            decode(bytes(frame))

    def test_payload_layout_mismatch(self):
        msg = E2Message(MsgType.CONTROL_REQ, 3, ControlRequest({
            Slice.EMBB: SchedulingPolicy.RR, Slice.URLLC: SchedulingPolicy.RR}))
        frame = bytearray(encode(msg))
        frame[3] -= 1
        with pytest.raises(FrameLengthError):
            decode(bytes(frame)[:-1])

    def test_indication_record_count_mismatch(self):
        rng = np.random.default_rng(2)
        msg = E2Message(MsgType.INDICATION, 5, Indication((random_record(rng),)))
        frame = bytearray(encode(msg))
        # bump the record count without adding bytes
        frame[9 + 3] += 1
        with pytest.raises(FrameLengthError):
            decode(bytes(frame))

    def test_frame_buffer_reassembles_split_stream(self):
        rng = np.random.default_rng(3)
        messages = [random_message(rng) for _ in range(40)]
        stream = b"".join(encode(m) for m in messages)
        buffer = FrameBuffer()
        received = []
        cut = 0
        while cut < len(stream):
            step = int(rng.integers(1, 17))
            received += buffer.feed(stream[cut:cut + step])
            cut += step
        assert received == messages


class TestSchedXApp:
    def test_cycle_anchors(self):
        assert xapp_pair_at(0) == (SchedulingPolicy.RR, SchedulingPolicy.RR)
        assert xapp_pair_at(4) == (SchedulingPolicy.WF, SchedulingPolicy.WF)
        assert xapp_pair_at(9) == (SchedulingPolicy.RR, SchedulingPolicy.RR)

    def test_emits_only_at_whole_seconds(self):
        xapp = SchedXApp()
        emitted = []
        for tti in range(0, 3000):
            ctrl = xapp.step(tti / 1000.0)
            if ctrl is not None:
                emitted.append((tti, ctrl))
        assert [t for t, _ in emitted] == [0, 1000, 2000]
        assert emitted[0][1].policies == {Slice.EMBB: SchedulingPolicy.RR,
                                          Slice.URLLC: SchedulingPolicy.RR}
        assert emitted[1][1].policies == {Slice.EMBB: SchedulingPolicy.RR,
                                          Slice.URLLC: SchedulingPolicy.WF}

    def test_nine_cycle_covers_every_pair_once(self):
        xapp = SchedXApp()
        pairs = []
        for second in range(9):
            ctrl = xapp.step(float(second))
            pairs.append((ctrl.policies[Slice.EMBB], ctrl.policies[Slice.URLLC]))
        assert len(set(pairs)) == 9
        wrap = xapp.step(9.0)
        assert (wrap.policies[Slice.EMBB], wrap.policies[Slice.URLLC]) == pairs[0]

    def test_negative_elapsed_rejected(self):
        with pytest.raises(ValueError):
            SchedXApp().step(-0.5)


class TestApplyControl:
    def test_staging_and_ack(self):
        staged = {}
        ack = apply_control(staged, {Slice.EMBB: SchedulingPolicy.PF,
                                     Slice.URLLC: SchedulingPolicy.WF})
        assert ack == ControlAck(success=True)
        assert staged == {Slice.EMBB: SchedulingPolicy.PF, Slice.URLLC: SchedulingPolicy.WF}

    def test_unknown_slice_fails_without_side_effects(self):
        staged = {}
        ack = apply_control(staged, {"sliceX": SchedulingPolicy.RR})
        assert ack == ControlAck(success=False)
        assert staged == {}

    def test_control_request_must_cover_both_slices(self):
        with pytest.raises(ValueError):
            ControlRequest({Slice.EMBB: SchedulingPolicy.RR})


class TestKpmCollector:
    def record(self, ts):
        return KpmRecord(timestamp_ms=ts, ue_id=1, slice=Slice.EMBB, throughput_bps=0,
                         buffer_bytes=0, cqi=0, mcs=0, granted_prbs=0, requested_prbs=0)

    def test_ten_indications_per_second_at_100ms(self):
        collector = KpmCollector(Subscription(kpm_period_ms=100))
        indications = []
        for tti in range(1000):
            collector.add([self.record(tti + 1)])
            out = collector.maybe_cut(tti + 1)
            if out is not None:
                indications.append(out)
        assert len(indications) == 10
        for n, ind in enumerate(indications, start=1):
            assert all((n - 1) * 100 < r.timestamp_ms <= n * 100 for r in ind.records)

    def test_empty_window_heartbeat(self):
        collector = KpmCollector(Subscription(kpm_period_ms=50))
        assert collector.maybe_cut(50) == Indication(records=())

    def test_slice_filter(self):
        collector = KpmCollector(Subscription(kpm_period_ms=10, slice_filter=Slice.URLLC))
        collector.add([self.record(5)])
        assert collector.maybe_cut(10) == Indication(records=())


class TestSocketService:
    def test_framed_round_trip_over_localhost(self):
        def handler(msg):
            if msg.msg_type is MsgType.SUB_REQ:
                return E2Message(MsgType.SUB_RESP, msg.correlation_id,
                                 SubscriptionResponse(accepted=True))
            return None

        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        server = threading.Thread(target=e2.serve_frames,
                                  args=("127.0.0.1", port, handler, 1), daemon=True)
        server.start()
        request = E2Message(MsgType.SUB_REQ, 42, Subscription(kpm_period_ms=100))
        frames = FrameBuffer()
        conn = None
        for _ in range(100):  # the server thread may still be binding
            try:
                conn = socket.create_connection(("127.0.0.1", port), timeout=5)
                break
            except ConnectionRefusedError:
                threading.Event().wait(0.05)
        assert conn is not None
        with conn:
            conn.sendall(encode(request))
            replies = []
            while not replies:
                replies = frames.feed(conn.recv(4096))
        server.join(timeout=5)
        assert replies == [E2Message(MsgType.SUB_RESP, 42, SubscriptionResponse(True))]
