//! Single-router timing and flow-control behaviour, driven port by port.

use dvc_noc::error::ProtocolError;
use dvc_noc::flit::{make_packet, Coord, FlitWidth, Packet};
use dvc_noc::router::{BufferMode, Port, Router, RouterInputs, RouterOutputs, RouterParams, Signal, WireFlit, NUM_PORTS};

fn centre(params: RouterParams) -> Router {
    Router::new(Coord::new(1, 1), params, [true; NUM_PORTS])
}

fn packet(dest: Coord, len: usize) -> Packet {
    make_packet(42, Coord::new(1, 1), dest, len, 0, FlitWidth::W64).unwrap()
}

fn feed(port: Port, flit: Option<WireFlit>) -> RouterInputs {
    let mut i = RouterInputs::default();
    i.flits[port.index()] = flit;
    i
}

/// Local injection of one packet, one flit per cycle; returns outputs by cycle.
fn stream(r: &mut Router, p: &Packet, vc: Option<u16>, cycles: u64) -> Vec<RouterOutputs> {
    (0..cycles)
        .map(|t| {
            let flit = p.flits.get(t as usize).map(|&flit| WireFlit { flit, vc });
            r.cycle(t, feed(Port::Local, flit)).unwrap()
        })
        .collect()
}

#[test]
fn four_stage_pipeline() {
    let mut r = centre(RouterParams::default());
    let p = packet(Coord::new(3, 1), 4);
    let outs = stream(&mut r, &p, None, 12);
    let sent: Vec<(u64, u16)> = outs
        .iter()
        .enumerate()
        .filter_map(|(t, o)| o.flits[Port::East.index()].map(|w| (t as u64, w.flit.seq)))
        .collect();
    // BW/RC at 0, VA at 1, SA at 2, ST at 3; followers stream one per cycle
    assert_eq!(sent, [(3, 0), (4, 1), (5, 2), (6, 3)]);
    let credits: Vec<u64> = outs
        .iter()
        .enumerate()
        .filter(|(_, o)| o.signals[Port::Local.index()].iter().any(|s| matches!(s, Signal::Credit { .. })))
        .map(|(t, _)| t as u64)
        .collect();
    assert_eq!(credits, [3, 4, 5, 6]);
    let retired = outs[6].signals[Port::Local.index()].contains(&Signal::VcRetired { vc: None });
    assert!(retired, "tail departure frees the upstream VC");
    assert_eq!(r.credits(Port::East), [12]);
    assert_eq!(r.free_downstream_vcs(Port::East), 15);
    assert!(r.input(Port::Local).table.rows().iter().all(|row| !row.is_active()));
}

#[test]
fn arriving_flit_for_this_node_is_ejected() {
    let mut r = centre(RouterParams::default());
    let p = make_packet(7, Coord::new(0, 1), Coord::new(1, 1), 2, 0, FlitWidth::W128).unwrap();
    let o = r.cycle(0, feed(Port::West, Some(WireFlit { flit: p.flits[0], vc: None }))).unwrap();
    assert_eq!(o.ejected.as_slice(), &p.flits[..1]);
    assert_eq!(o.signals[Port::West.index()].as_slice(), [Signal::Credit { vc: None }]);
    let o = r.cycle(1, feed(Port::West, Some(WireFlit { flit: p.flits[1], vc: None }))).unwrap();
    assert_eq!(
        o.signals[Port::West.index()].as_slice(),
        [Signal::Credit { vc: None }, Signal::VcRetired { vc: None }]
    );
    assert_eq!(r.occupied_slots(), 0);
}

#[test]
fn static_mode_names_downstream_vc() {
    let params = RouterParams { buffer_mode: BufferMode::Static { vcs: 4, depth: 4 }, ..RouterParams::default() };
    let mut r = centre(params);
    let p = packet(Coord::new(1, 3), 3);
    let outs = stream(&mut r, &p, Some(2), 10);
    let sent: Vec<WireFlit> = outs.iter().filter_map(|o| o.flits[Port::South.index()]).collect();
    assert_eq!(sent.len(), 3);
    assert!(sent.iter().all(|w| w.vc == Some(0)), "lowest free downstream VC");
    // upstream credits name the input VC the packet used
    assert!(outs[3].signals[Port::Local.index()].contains(&Signal::Credit { vc: Some(2) }));
    assert_eq!(r.credits(Port::South), [1, 4, 4, 4]);
    assert_eq!(r.free_downstream_vcs(Port::South), 3);
}

#[test]
fn credit_exhaustion_stalls_output() {
    let mut r = centre(RouterParams::default());
    let p = packet(Coord::new(2, 1), 20);
    let outs = stream(&mut r, &p, None, 40);
    let sent = outs.iter().filter(|o| o.flits[Port::East.index()].is_some()).count();
    // sixteen downstream slots, no credits ever returned
    assert_eq!(sent, 16);
    assert_eq!(r.credits(Port::East), [0]);
}

#[test]
fn protocol_breaches_are_errors() {
    let mut r = Router::new(Coord::new(0, 0), RouterParams::default(), [false, true, true, false, true]);
    let p = make_packet(1, Coord::new(1, 0), Coord::new(3, 3), 2, 0, FlitWidth::W128).unwrap();
    let e = r.cycle(0, feed(Port::West, Some(WireFlit { flit: p.flits[0], vc: None }))).unwrap_err();
    assert_eq!(e, ProtocolError::UnconnectedInput { port: Port::West });

    let mut r = centre(RouterParams::default());
    let e = r.cycle(0, feed(Port::North, Some(WireFlit { flit: p.flits[1], vc: None }))).unwrap_err();
    assert!(matches!(e, ProtocolError::MissingHeader { .. }), "{e}");

    let mut r = centre(RouterParams::default());
    let mut sig = RouterInputs::default();
    sig.signals[Port::East.index()].push(Signal::Credit { vc: None });
    assert!(matches!(r.cycle(0, sig).unwrap_err(), ProtocolError::CreditOverflow { .. }));

    let mut r = centre(RouterParams::default());
    let mut sig = RouterInputs::default();
    sig.signals[Port::East.index()].push(Signal::VcRetired { vc: None });
    assert!(matches!(r.cycle(0, sig).unwrap_err(), ProtocolError::TokenOverflow { .. }));

    let params = RouterParams { buffer_mode: BufferMode::Static { vcs: 4, depth: 4 }, ..RouterParams::default() };
    let mut r = centre(params);
    let q = packet(Coord::new(3, 1), 2);
    let e = r.cycle(0, feed(Port::Local, Some(WireFlit { flit: q.flits[0], vc: None }))).unwrap_err();
    assert_eq!(e, ProtocolError::MissingVcId);
}

#[test]
fn two_inputs_to_distinct_outputs_move_together() {
    let mut r = centre(RouterParams::default());
    let a = make_packet(1, Coord::new(0, 1), Coord::new(3, 1), 2, 0, FlitWidth::W128).unwrap();
    let b = make_packet(2, Coord::new(1, 0), Coord::new(1, 3), 2, 0, FlitWidth::W128).unwrap();
    let mut outs = Vec::new();
    for t in 0..6u64 {
        let mut i = RouterInputs::default();
        i.flits[Port::West.index()] = a.flits.get(t as usize).map(|&flit| WireFlit { flit, vc: None });
        i.flits[Port::North.index()] = b.flits.get(t as usize).map(|&flit| WireFlit { flit, vc: None });
        outs.push(r.cycle(t, i).unwrap());
    }
    assert!(outs[3].flits[Port::East.index()].is_some() && outs[3].flits[Port::South.index()].is_some());
}
