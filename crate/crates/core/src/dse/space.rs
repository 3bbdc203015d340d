use crate::perf::estimate_resources;
use crate::protocol::{ArchHint, ProtocolSpec};
use crate::sim::{ArchConfig, SchedulerKind, TableKind, VoqKind};

use super::DseError;

pub const TEMPLATE_WIDTHS: [u32; 3] = [256, 512, 1024];
pub const TEMPLATE_ISLIP_ITERATIONS: usize = 2;

fn pinned<'a>(spec: &'a ProtocolSpec, key: &str) -> Option<&'a str> {
    match spec.arch_hints().get(key) {
        Some(ArchHint::Pinned(v)) => Some(v.as_str()),
        _ => None,
    }
}

fn dimension<T: Copy + std::str::FromStr>(spec: &ProtocolSpec, key: &str, all: &[T]) -> Result<Vec<T>, DseError> {
    match pinned(spec, key) {
        None => Ok(all.to_vec()),
        Some(v) => v.parse().map(|x| vec![x]).map_err(|_| DseError::BadHint {
            key: key.into(),
            value: v.into(),
        }),
    }
}

/// Cross product of table, buffer, scheduler and width for `ports` ports.
/// Pinned `arch` hints in the protocol fix their dimension. Every template
/// runs at the clock the resource model predicts for it, with unbounded
/// buffers.
pub fn template_space(spec: &ProtocolSpec, ports: usize) -> Result<Vec<ArchConfig>, DseError> {
    if let Some(p) = pinned(spec, "ports") {
        if p.parse::<usize>().ok() != Some(ports) {
            return Err(DseError::BadHint {
                key: "ports".into(),
                value: p.into(),
            });
        }
    }
    let tables = dimension(spec, "fwd_table", TableKind::ALL)?;
    let voqs = dimension(spec, "voq", &[VoqKind::Nxn, VoqKind::Shared])?;
    let scheds = dimension(spec, "scheduler", SchedulerKind::ALL)?;
    let widths = dimension(spec, "width_bits", &TEMPLATE_WIDTHS)?;
    let key_bits = spec.routing_key_bits();
    let mut out = Vec::new();
    for &t in &tables {
        for &v in &voqs {
            for &s in &scheds {
                for &w in &widths {
                    let mut c = ArchConfig::new(ports, w, t, v, s).unbounded();
                    if s == SchedulerKind::Islip {
                        c = c.with_islip_iterations(TEMPLATE_ISLIP_ITERATIONS.min(ports));
                    }
                    c.clock_mhz = estimate_resources(&c, key_bits).freq_mhz;
                    out.push(c);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::parse_spec;

    #[test]
    fn full_space_and_pins() {
        let s = parse_spec("protocol p\nfield dst 8 role=routing_key\n").unwrap();
        let all = template_space(&s, 8).unwrap();
        assert_eq!(all.len(), 36);
        assert!(all.iter().all(|c| c.has_infinite_buffers()));
        let rr = all.iter().find(|c| c.scheduler == SchedulerKind::Rr).unwrap();
        let islip = all.iter().find(|c| c.scheduler == SchedulerKind::Islip).unwrap();
        assert!(rr.clock_mhz > islip.clock_mhz);
        assert_eq!(islip.islip_iterations, 2);

        let s = parse_spec("protocol p\narch voq=shared\narch width_bits=256\nfield dst 8 role=routing_key\n").unwrap();
        let few = template_space(&s, 8).unwrap();
        assert_eq!(few.len(), 6);
        assert!(few.iter().all(|c| c.voq == VoqKind::Shared && c.data_width_bits == 256));

        let s = parse_spec("protocol p\narch scheduler=fifo\nfield dst 8 role=routing_key\n").unwrap();
        assert!(matches!(template_space(&s, 8), Err(DseError::BadHint { .. })));
    }
}
