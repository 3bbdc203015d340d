use std::collections::VecDeque;

use crate::trace::Trace;

use super::sched::{make_arbiter, Matching};
use super::{Buffers, Fidelity, ResultAcc, SimError, SimOptions, SimResult, SwitchModel, VoqKind};

#[derive(Debug, Clone, Copy)]
struct Pkt {
    arrival: u64,
    ready: u64,
    bits: u64,
    dst: u64,
    src: u64,
    flits: u32,
}

#[derive(Debug, Clone, Copy)]
struct Ingress {
    pkt: u32,
    flit: u32,
    next: u64,
}

#[derive(Debug, Clone, Copy)]
struct Transfer {
    output: usize,
    slot: u32,
    pkt: u32,
    start: u64,
    end: u64,
}

/// Advances the switch one cycle at a time: ingress flits, parser delay,
/// banked table access, VOQ write, arbitration and egress flits. Fully idle
/// stretches between arrivals are skipped.
pub fn run_cycle_sim(model: &SwitchModel, trace: &Trace, opts: &SimOptions) -> Result<SimResult, SimError> {
    model.check_trace(trace)?;
    let cfg = model.config();
    if cfg.has_infinite_buffers() && !opts.profiling {
        return Err(SimError::BadConfig("unbounded buffers need profiling mode".into()));
    }
    let n = cfg.ports;
    let ii = model.ii() as u64;
    let st = model.stages();
    let (p_lat, t_lat, v_lat) = (st.parser as u64, st.table as u64, st.voq as u64);
    let s_lat = st.scheduler as u64;
    let d_lat = st.deparser as u64;
    let hf = model.header_flits();
    let key_bits = model.key_bits();
    let learns = model.learns();

    let mut pkts: Vec<Pkt> = Vec::with_capacity(trace.len());
    let mut arrivals: Vec<VecDeque<u32>> = vec![VecDeque::new(); n];
    for e in &trace.events {
        arrivals[e.src_port].push_back(pkts.len() as u32);
        pkts.push(Pkt {
            arrival: model.arrival_cycle(e.time_ns),
            ready: u64::MAX,
            bits: model.packet_bits(e.payload_bytes),
            dst: e.dst_addr.key(key_bits),
            src: e.src_addr,
            flits: model.packet_flits(e.payload_bytes),
        });
    }

    let mut table = model.new_table();
    let mut buffers = Buffers::new(cfg);
    let mut arbiter = make_arbiter(cfg.scheduler, n, cfg.islip_iterations);
    let mut acc = ResultAcc::new(n, cfg.voq == VoqKind::Shared);

    let mut ingress: Vec<Option<Ingress>> = vec![None; n];
    let mut ingress_free = vec![0u64; n];
    let mut parse_q: Vec<VecDeque<(u64, u32)>> = vec![VecDeque::new(); n];
    let mut table_free = vec![0u64; n];
    let mut enq_q: VecDeque<(u64, u32, u64)> = VecDeque::new();
    let mut learned: Vec<(u64, usize)> = Vec::with_capacity(n);
    let mut xfer: Vec<Option<Transfer>> = vec![None; n];
    let mut egress_flits = vec![0u64; n];
    let mut requests = vec![0u64; n];
    let mut m = Matching::empty(n);
    let all = crate::trace::broadcast_key(n as u32);
    let (mut free_in, mut free_out) = (all, all);
    let mut next_arb = 0u64;
    let mut in_pipeline = 0usize;

    let mut t = arrivals
        .iter()
        .filter_map(|q| q.front().map(|&k| pkts[k as usize].arrival))
        .min()
        .unwrap_or(0);
    let stop = opts.max_cycles.unwrap_or(u64::MAX);

    while t < stop {
        // ingress: one flit per port every II cycles
        for p in 0..n {
            if ingress[p].is_none() && t >= ingress_free[p] {
                if let Some(&k) = arrivals[p].front() {
                    if pkts[k as usize].arrival <= t {
                        arrivals[p].pop_front();
                        ingress[p] = Some(Ingress { pkt: k, flit: 0, next: t });
                        in_pipeline += 1;
                    }
                }
            }
            if let Some(g) = ingress[p].as_mut() {
                if g.next == t {
                    if g.flit + 1 == hf {
                        parse_q[p].push_back((t + p_lat, g.pkt));
                    }
                    g.flit += 1;
                    g.next += ii;
                    if g.flit == pkts[g.pkt as usize].flits {
                        ingress_free[p] = g.next;
                        ingress[p] = None;
                    }
                }
            }
        }

        // table: one access per bank per cycle, later ports stall
        let mut banks_busy = 0u64;
        for p in 0..n {
            let Some(&(due, k)) = parse_q[p].front() else { continue };
            if due > t || table_free[p] > t {
                continue;
            }
            let pk = &pkts[k as usize];
            if let Some(b) = table.bank_of(pk.dst) {
                let bit = 1u64 << (b % 64);
                if banks_busy & bit != 0 {
                    continue;
                }
                banks_busy |= bit;
            }
            let mask = table.lookup(pk.dst, p);
            if learns {
                learned.push((pk.src, p));
            }
            parse_q[p].pop_front();
            enq_q.push_back((t + t_lat, k, mask));
            table_free[p] = t + ii;
        }
        for (src, p) in learned.drain(..) {
            table.learn(src, p);
        }

        // VOQ write
        while let Some(&(due, k, mask)) = enq_q.front() {
            if due > t {
                break;
            }
            enq_q.pop_front();
            in_pipeline -= 1;
            let pk = &mut pkts[k as usize];
            pk.ready = due + v_lat + (pk.flits - hf) as u64 * ii;
            let input = trace.events[k as usize].src_port;
            buffers.enqueue(k, input, mask, pk.flits, &mut acc);
        }

        // transfers finishing this cycle release their ports
        for i in 0..n {
            let Some(x) = xfer[i] else { continue };
            if x.end != t {
                continue;
            }
            xfer[i] = None;
            let backlogged = buffers.complete(i, x.output, x.slot);
            arbiter.transfer_done(i, x.output, backlogged);
            free_in |= 1u64 << i;
            free_out |= 1u64 << x.output;
            let pk = &pkts[x.pkt as usize];
            let exit = x.start + s_lat + (pk.flits as u64 - 1) * ii + d_lat;
            acc.ledger.delivered += 1;
            if pk.arrival >= opts.warmup_cycles {
                acc.per_port[x.output].push(model.latency_ns(pk.arrival, exit, pk.flits));
            }
            if t >= opts.warmup_cycles {
                acc.window_bits += pk.bits;
                acc.window_flits += pk.flits as u64;
            }
        }

        // arbitration
        if t >= next_arb && free_in != 0 && free_out != 0 && !buffers.is_empty() {
            let mut any = 0u64;
            for i in 0..n {
                requests[i] = if free_in & (1u64 << i) != 0 {
                    buffers.requests(i, free_out, |k| pkts[k as usize].ready <= t)
                } else {
                    0
                };
                any |= requests[i];
            }
            if any != 0 {
                next_arb = t + ii;
                arbiter.arbitrate_into(&requests, &mut m);
                for (i, j) in m.pairs() {
                    let slot = buffers.start(i, j);
                    let k = buffers.slot(slot).pkt;
                    let flits = pkts[k as usize].flits as u64;
                    xfer[i] = Some(Transfer {
                        output: j,
                        slot,
                        pkt: k,
                        start: t,
                        end: t + flits * ii,
                    });
                    free_in &= !(1u64 << i);
                    free_out &= !(1u64 << j);
                }
            }
        }

        // egress: active transfers move one flit every II cycles
        for x in xfer.iter().flatten() {
            if (t - x.start) % ii == 0 {
                egress_flits[x.output] += 1;
            }
        }

        t += 1;
        let idle = in_pipeline == 0 && buffers.is_empty() && xfer.iter().all(Option::is_none);
        if idle {
            match arrivals
                .iter()
                .filter_map(|q| q.front().map(|&k| pkts[k as usize].arrival))
                .min()
            {
                Some(next) => t = t.max(next),
                None => break,
            }
        }
    }

    acc.ledger.residual = buffers.pending_copies() + in_pipeline as u64;
    acc.ledger.injected += in_pipeline as u64;
    let end = t.min(stop);
    debug_assert!(egress_flits.iter().sum::<u64>() >= acc.window_flits);
    Ok(acc.finish(
        Fidelity::Cycle,
        model.cycle_ns(),
        end,
        end.saturating_sub(opts.warmup_cycles),
        ii as u32,
    ))
}
