#![allow(dead_code)]

use dvc_noc::config::SimConfig;
use dvc_noc::flit::{make_packet, Coord, FlitWidth};
use dvc_noc::mesh::{Mesh, TraceEvent};
use dvc_noc::router::RouterParams;
use dvc_noc::sim::{Delivery, Simulation};
use dvc_noc::traffic::{Injector, TrafficPattern};

/// Mesh whose injectors never fire; traffic is added by hand.
pub fn quiet_mesh(w: u16, h: u16, params: RouterParams) -> Mesh {
    Mesh::new(w, h, params, |c| Injector::new(c, w, h, TrafficPattern::UniformRandom, 0.0, 4, FlitWidth::W128, 0))
        .expect("valid mesh")
}

/// Sends one packet through an otherwise empty mesh; returns its latency and the trace.
pub fn lone_packet(mesh: &mut Mesh, src: Coord, dest: Coord, len: usize) -> (u64, Vec<TraceEvent>) {
    mesh.enable_trace();
    let start = mesh.cycle();
    let p = make_packet(1, src, dest, len, start, FlitWidth::W128).expect("valid packet");
    mesh.inject_packet(p);
    for _ in 0..1000 {
        let s = mesh.step(None).expect("no protocol error");
        mesh.check_invariants().expect("ledgers hold");
        if let Some((_, f)) = s.delivered.iter().find(|(_, f)| f.is_tail()) {
            return (s.cycle - f.inject_cycle, mesh.take_trace());
        }
    }
    panic!("packet {src}->{dest} not delivered");
}

/// Reference round robin: search upward from the index after the last grant, wrapping.
pub fn modular_search(last: Option<usize>, width: usize, requests: u64) -> Option<usize> {
    let start = last.map_or(0, |g| (g + 1) % width);
    (0..width).map(|k| (start + k) % width).find(|&i| requests & (1 << i) != 0)
}

pub fn short_config(rate: f64) -> SimConfig {
    let mut c = SimConfig::default();
    c.traffic.rate = rate;
    c.sim.warmup = 200;
    c.sim.measure = 2000;
    c
}

pub fn delivery_log(config: &SimConfig, threads: usize) -> (Vec<Delivery>, dvc_noc::MetricsReport) {
    let out = Simulation::new(config, threads).expect("valid config").with_delivery_log().run().expect("clean run");
    (out.deliveries, out.report)
}
