"""Experiment runner: channels, RIS optimization, TTI loop and outputs.

One run is fully determined by (scenario, seed): channel realizations,
traffic arrivals and the control loop all derive their randomness from the
scenario seed through named substreams.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from . import channel, e2, mac, metrics, ris
from .core import Slice, SchedulingPolicy, CARRIER_BANDWIDTH_HZ
from .scenarios import (BS_POSITION, CARRIER_FREQUENCY_HZ, RIS_REFERENCE_POSITION,
                        ScenarioConfig, TRAFFIC_BY_SLICE, ue_position)
from .traffic import TrafficSource

KPM_PERIOD_MS = 100

# seed substream tags
_TAG_RIS_BS = 0
_TAG_UE_BS = 1
_TAG_UE_RIS = 2
_TAG_TRAFFIC = 3

RIS_GAINS_CSV_COLUMNS = ("ue_count", "ris_elements", "weights", "aggregate_gain_db")


def subseed(seed: int, *tags: int) -> int:
    """Named 64-bit substream seed derived from the scenario seed."""
    return int(np.random.SeedSequence((seed,) + tags).generate_state(1, np.uint64)[0])


@dataclass
class RunResult:
    config: ScenarioConfig
    kpm_records: list
    summary_rows: list
    prb_ratios: dict
    slice_totals: dict
    ris_summary: dict
    ue_gains: dict
    links: list
    policy_trace: list  # (tti_applied, {slice: policy}) per control application


def build_channels(cfg: ScenarioConfig):
    """Per-UE channel sets for the scenario's geometry and seed.

    The RIS-to-BS link is a single physical link shared by every UE; when
    the scenario has no RIS the cascaded links are omitted.
    """
    positions = tuple(ue_position(u) for u in cfg.ue_ids)
    ris_elements = max(cfg.ris_elements, 1)  # geometry needs >= 1 element
    geometry = channel.NodeGeometry(
        bs_position=BS_POSITION, ris_reference_position=RIS_REFERENCE_POSITION,
        ue_positions=positions, carrier_frequency=CARRIER_FREQUENCY_HZ,
        ris_element_count=ris_elements)

    bs = np.asarray(BS_POSITION, float)
    ris_pos = np.asarray(RIS_REFERENCE_POSITION, float)
    links: list[channel.LinkChannel] = []
    channel_sets: dict[int, ris.UeChannelSet] = {}

    ris_to_bs_link = None
    if cfg.ris_elements > 0:
        d_ris_bs = float(np.linalg.norm(ris_pos - bs))
        g_ris_bs = channel.average_realizations(
            channel.LinkKind.RIS_TO_BS, d_ris_bs, True, channel.LOS_MPC_COUNT,
            seed=subseed(cfg.seed, _TAG_RIS_BS))
        sv_bs = channel.steering_vector(ris_elements, geometry.element_separation,
                                        geometry.wavelength,
                                        channel.array_direction_cosine(ris_pos, bs))
        ris_to_bs_link = channel.LinkChannel(
            channel.LinkKind.RIS_TO_BS, los=True,
            element_gains=channel.apply_steering(g_ris_bs, sv_bs))
        links.append(ris_to_bs_link)

    for ue_id, pos in zip(cfg.ue_ids, positions):
        ue = np.asarray(pos, float)
        d_ue_bs = float(np.linalg.norm(ue - bs))
        h_direct = channel.average_realizations(
            channel.LinkKind.UE_TO_BS, d_ue_bs, False, channel.NLOS_MPC_COUNT,
            seed=subseed(cfg.seed, _TAG_UE_BS, ue_id))
        links.append(channel.LinkChannel(channel.LinkKind.UE_TO_BS, los=False,
                                         scalar_gain=h_direct))
        if cfg.ris_elements > 0:
            d_ue_ris = float(np.linalg.norm(ue - ris_pos))
            g_ue_ris = channel.average_realizations(
                channel.LinkKind.UE_TO_RIS, d_ue_ris, True, channel.LOS_MPC_COUNT,
                seed=subseed(cfg.seed, _TAG_UE_RIS, ue_id))
            sv_ue = channel.steering_vector(ris_elements, geometry.element_separation,
                                            geometry.wavelength,
                                            channel.array_direction_cosine(ris_pos, ue))
            ue_to_ris = channel.apply_steering(g_ue_ris, sv_ue)
            links.append(channel.LinkChannel(channel.LinkKind.UE_TO_RIS, los=True,
                                             element_gains=ue_to_ris))
            channel_sets[ue_id] = ris.UeChannelSet(
                direct=h_direct, ue_to_ris=ue_to_ris,
                ris_to_bs=ris_to_bs_link.element_gains)
        else:
            channel_sets[ue_id] = ris.UeChannelSet(
                direct=h_direct, ue_to_ris=np.zeros(1, complex),
                ris_to_bs=np.zeros(1, complex))
    return channel_sets, links


def optimize_ris(cfg: ScenarioConfig, channel_sets: dict):
    """RIS phase selection; returns (gains per UE, optimizer summary row)."""
    ordered = [channel_sets[u] for u in cfg.ue_ids]
    if cfg.ris_elements == 0:
        gains = {u: abs(cs.direct) ** 2 for u, cs in zip(cfg.ue_ids, ordered)}
        aggregate = sum(gains.values())
        weights_text = ""
    else:
        weights, theta, aggregate = ris.optimize_weights(ordered)
        gains = {u: channel.overall_gain(cs.direct, cs.ris_to_bs, theta, cs.ue_to_ris)
                 for u, cs in zip(cfg.ue_ids, ordered)}
        weights_text = ";".join(f"{w:.6g}" for w in weights.weights)
    summary = {
        "ue_count": len(cfg.ue_ids),
        "ris_elements": cfg.ris_elements,
        "weights": weights_text,
        "aggregate_gain_db": 10.0 * math.log10(aggregate) if aggregate > 0 else float("-inf"),
    }
    return gains, summary


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    channel_sets, links = build_channels(cfg)
    ue_gains, ris_summary = optimize_ris(cfg, channel_sets)

    ues = [mac.UeContext.from_gain(u, cfg.slice_of[u], ue_gains[u]) for u in cfg.ue_ids]
    state = mac.RanState(ues)
    slicing = mac.SlicingConfig(slice_quotas=cfg.slice_quotas())
    policies = {sl: cfg.policy_for(sl) for sl in Slice}

    n_tti = cfg.duration_s * 1000
    arrivals = {u.ue_id: TrafficSource(TRAFFIC_BY_SLICE[u.slice],
                                       subseed(cfg.seed, _TAG_TRAFFIC, u.ue_id)
                                       ).pregenerate(n_tti).tolist()
                for u in ues}

    # control plane: RIC and RAN agent exchange framed bytes in-process
    xapp = ric_end = agent_end = agent_collector = None
    pending_policies: dict[Slice, SchedulingPolicy] = {}
    next_corr = 1
    if cfg.xapp_enabled:
        link = e2.InProcessLink()
        ric_end, agent_end = link.endpoint("a"), link.endpoint("b")
        subscription = e2.Subscription(kpm_period_ms=KPM_PERIOD_MS)
        ric_end.send(e2.E2Message(e2.MsgType.SUB_REQ, 0, subscription))
        (sub_req,) = agent_end.poll()
        agent_collector = e2.KpmCollector(sub_req.payload)
        agent_end.send(e2.E2Message(e2.MsgType.SUB_RESP, sub_req.correlation_id,
                                    e2.SubscriptionResponse(accepted=True)))
        ric_end.poll()
        xapp = e2.SchedXApp()

    def pump_control(elapsed_s: float):
        nonlocal next_corr
        ctrl = xapp.step(elapsed_s)
        if ctrl is None:
            return
        ric_end.send(e2.E2Message(e2.MsgType.CONTROL_REQ, next_corr, ctrl))
        next_corr += 1
        for msg in agent_end.poll():
            if msg.msg_type is e2.MsgType.CONTROL_REQ:
                ack = e2.apply_control(pending_policies, msg.payload.policies)
                agent_end.send(e2.E2Message(e2.MsgType.CONTROL_ACK, msg.correlation_id, ack))
        ric_end.poll()

    if cfg.xapp_enabled:
        pump_control(0.0)

    ordered_ues = state.ues
    ue_arrivals = [arrivals[u.ue_id] for u in ordered_ues]
    window_served = [0] * len(ordered_ues)
    window_granted = [0] * len(ordered_ues)
    window_requested = [0] * len(ordered_ues)
    index_of = {u.ue_id: i for i, u in enumerate(ordered_ues)}
    totals = {sl: {"granted": 0, "requested": 0, "demand": 0} for sl in Slice}
    period_records: list[metrics.KpmRecord] = []
    policy_trace: list[tuple] = []
    run_one_tti = mac.run_tti

    for tti in range(n_tti):
        if pending_policies:
            policies.update(pending_policies)
            pending_policies.clear()
            policy_trace.append((tti, dict(policies)))
        for ue, stream in zip(ordered_ues, ue_arrivals):
            ue.buffer.enqueue(stream[tti])
        allocation, tti_records = run_one_tti(state, slicing, policies)
        for sl in Slice:
            bucket = totals[sl]
            bucket["granted"] += allocation.granted_prbs[sl]
            bucket["requested"] += allocation.requested_prbs[sl]
            bucket["demand"] += allocation.demand_prbs[sl]
        for rec in tti_records:
            # summing per-TTI rates; dividing by the window's TTI count
            # later yields the exact window-mean rate
            i = index_of[rec.ue_id]
            window_served[i] += rec.throughput_bps
            window_granted[i] += rec.granted_prbs
            window_requested[i] += rec.requested_prbs
        if agent_collector is not None:
            agent_collector.add(tti_records)
        now_ms = tti + 1
        if now_ms % KPM_PERIOD_MS == 0:
            for i, ue in enumerate(ordered_ues):
                period_records.append(metrics.KpmRecord(
                    timestamp_ms=now_ms, ue_id=ue.ue_id, slice=ue.slice,
                    throughput_bps=window_served[i] // KPM_PERIOD_MS,
                    buffer_bytes=ue.buffer.queued_bytes, cqi=ue.cqi, mcs=ue.mcs,
                    granted_prbs=window_granted[i],
                    requested_prbs=window_requested[i]))
                window_served[i] = 0
                window_granted[i] = 0
                window_requested[i] = 0
            if agent_collector is not None:
                indication = agent_collector.maybe_cut(now_ms)
                if indication is not None:
                    agent_end.send(e2.E2Message(e2.MsgType.INDICATION, 0, indication))
                    ric_end.poll()
        if cfg.xapp_enabled and now_ms % 1000 == 0:
            pump_control(now_ms / 1000.0)

    prb_ratios = {sl: metrics.prb_ratio(totals[sl]["granted"], totals[sl]["requested"])
                  for sl in Slice if any(cfg.slice_of[u] is sl for u in cfg.ue_ids)}
    summary_rows = metrics.aggregate(period_records, group_by="slice")
    return RunResult(config=cfg, kpm_records=period_records, summary_rows=summary_rows,
                     prb_ratios=prb_ratios, slice_totals=totals, ris_summary=ris_summary,
                     ue_gains=ue_gains, links=links, policy_trace=policy_trace)


def median_slice_metric(result: RunResult, sl: Slice, metric: str) -> float:
    """Lower-interpolation median of one KPM field over a slice's samples."""
    values = [getattr(r, metric) for r in result.kpm_records if r.slice is sl]
    if not values:
        return float("nan")
    return float(np.percentile(np.asarray(values, float), 50, method="lower"))


def write_outputs(result: RunResult, out_dir, dump_channels: bool = False) -> None:
    os.makedirs(out_dir, exist_ok=True)
    metrics.export_kpm_csv(result.kpm_records, os.path.join(out_dir, "kpm.csv"))
    ratio_rows = [{"config_id": result.config.config_id, "slice": str(sl),
                   "metric": "prb_ratio", "median": ratio, "p25": ratio,
                   "p75": ratio, "mean": ratio}
                  for sl, ratio in sorted(result.prb_ratios.items(), key=lambda kv: kv[0].value)]
    metrics.export_summary_csv(result.config.config_id, result.summary_rows,
                               os.path.join(out_dir, "summary.csv"), extra_rows=ratio_rows)
    ris.export_optimizer_csv(
        [{"ue_count": result.ris_summary["ue_count"],
          "ris_elements": result.ris_summary["ris_elements"],
          "weights": [float(w) for w in result.ris_summary["weights"].split(";") if w],
          "aggregate_gain_db": result.ris_summary["aggregate_gain_db"]}],
        os.path.join(out_dir, "ris_gains.csv"))
    if dump_channels:
        channel.export_channels_csv(result.links, os.path.join(out_dir, "channels.csv"))


COMPARE_METRICS = (
    (Slice.EMBB, "throughput_bps"),
    (Slice.URLLC, "throughput_bps"),
    (Slice.EMBB, "buffer_bytes"),
    (Slice.URLLC, "buffer_bytes"),
    (Slice.EMBB, "prb_ratio"),
    (Slice.URLLC, "prb_ratio"),
)


def _seed_metrics(result: RunResult) -> dict:
    out = {}
    for sl, metric in COMPARE_METRICS:
        if metric == "prb_ratio":
            out[(sl, metric)] = result.prb_ratios.get(sl, float("nan"))
        else:
            out[(sl, metric)] = median_slice_metric(result, sl, metric)
    return out


def compare(config_ids, seeds, duration_s: int | None = None):
    """Across-seed medians per config plus pairwise percent deltas."""
    from .scenarios import load_scenario

    if not seeds:
        raise ValueError("compare needs at least one seed")
    per_config = {}
    for cid in config_ids:
        rows = [_seed_metrics(run_scenario(load_scenario(cid, seed=s, duration_s=duration_s)))
                for s in seeds]
        per_config[cid] = {
            key: float(np.percentile([r[key] for r in rows], 50, method="lower"))
            if not any(np.isnan(r[key]) for r in rows) else float("nan")
            for key in rows[0]}
    deltas = []
    ids = list(config_ids)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            for key in per_config[a]:
                base, other = per_config[a][key], per_config[b][key]
                if np.isnan(base) or np.isnan(other):
                    continue
                if base == 0:
                    pct = 0.0 if other == 0 else float("inf")
                else:
                    pct = (other - base) / base * 100.0
                deltas.append({"from": a, "to": b, "slice": str(key[0]),
                               "metric": key[1], "delta_pct": pct})
    return per_config, deltas
