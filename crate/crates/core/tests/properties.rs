mod common;

use proptest::prelude::*;
use starsim::nand::{read_dump, write_dump, LcsForm, LcsModel};
use starsim::pipeline::{pipeline_cycles, schedule_zigzag, unschedule_zigzag, DatapathConfig};
use starsim::randomizer::{group_error, optimal_flip, star_flip_states, Fib, FlipOp, Randomizer};
use starsim::{build_delta_lut, CellState, CellType, ErrorProfile, FlashArray, Geometry, GrayCodeMap, Mode, WlAddr};

fn cell_type() -> impl Strategy<Value = CellType> {
    prop_oneof![Just(CellType::Tlc), Just(CellType::Qlc)]
}

fn states(cell: CellType, len: usize) -> impl Strategy<Value = Vec<CellState>> {
    prop::collection::vec(0..cell.states() as u8, len)
        .prop_map(move |v| v.into_iter().map(|k| CellState::new(k, cell).unwrap()).collect())
}

fn profile(cell: CellType) -> impl Strategy<Value = ErrorProfile> {
    prop::collection::vec(1e-4f64..1e-2, cell.states()).prop_map(move |e| {
        let mut p = ErrorProfile::uniform(cell.bits_per_cell(), 0.01);
        p.e = e;
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_flip_never_raises_group_error(
        (cell, p, g) in cell_type().prop_flat_map(|c| (Just(c), profile(c), states(c, 128)))
    ) {
        let map = GrayCodeMap::standard(cell);
        let lut = build_delta_lut(&p, &map).unwrap();
        let f = optimal_flip(&g, &lut);
        let after: Vec<CellState> = g.iter().map(|&s| f.apply(s, &map)).collect();
        prop_assert!(group_error(&after, &p).0 <= group_error(&g, &p).0 + 1e-12);
        prop_assert_eq!(f, common::brute_force_flip(&g, &p, &map));
    }

    #[test]
    fn flips_are_involutions(cell in cell_type(), mask in 0u8..16, k in 0u8..16) {
        let map = GrayCodeMap::standard(cell);
        let mask = mask % cell.states() as u8;
        let s = CellState::new(k % cell.states() as u8, cell).unwrap();
        let f = FlipOp::new(mask, cell).unwrap();
        prop_assert_eq!(f.apply(f.apply(s, &map), &map), s);
    }

    #[test]
    fn fib_bytes_round_trip((cell, wl) in cell_type().prop_flat_map(|c| (Just(c), states(c, 1000)))) {
        let p = ErrorProfile::default_for(cell);
        let map = GrayCodeMap::standard(cell);
        let lut = build_delta_lut(&p, &map).unwrap();
        let mut s = wl.clone();
        let fib = star_flip_states(&mut s, 128, &lut, &map);
        let back = Fib::from_bytes(&fib.to_bytes(), cell.bits_per_cell(), fib.len()).unwrap();
        prop_assert_eq!(&back, &fib);
        for (g, chunk) in s.chunks_mut(128).enumerate() {
            let f = back.get(g);
            chunk.iter_mut().for_each(|c| *c = f.apply(*c, &map));
        }
        prop_assert_eq!(s, wl);
    }

    #[test]
    fn zigzag_schedule_round_trips(
        pages in prop::collection::vec(prop::collection::vec(any::<u8>(), 64), 4),
        wide in any::<bool>(),
    ) {
        let io = if wide { 64 } else { 32 };
        let stream = schedule_zigzag(&pages, 128, io).unwrap();
        prop_assert_eq!(unschedule_zigzag(&stream, 4, 128).unwrap(), pages);
    }

    #[test]
    fn pipeline_matches_cycle_stepping(lat in (1u32..10, 1u32..50, 1u32..10), lanes in 1u32..40, units in 1u32..17, n in 1u64..64) {
        let mut cfg = DatapathConfig::standard(32);
        cfg.stage_latencies = [lat.0, lat.1, lat.2];
        cfg.scan_lanes = lanes;
        cfg.pee_units = units;
        prop_assert_eq!(pipeline_cycles(&cfg, n), common::tick_pipeline(&cfg, n));
    }

    #[test]
    fn lcs_factor_is_symmetric_in_neighbours(up in 0u8..16, k in 0u8..16, down in 0u8..16) {
        let m = LcsModel::new(16, 64.0, 6.0, 0.75, LcsForm::PowerOfSum).unwrap();
        let s = |x| CellState::new(x, CellType::Qlc).unwrap();
        prop_assert_eq!(m.factor(s(up), s(k), s(down)), m.factor(s(down), s(k), s(up)));
        prop_assert!(m.factor(s(up), s(k), s(down)) >= 0.0);
    }
}

#[test]
fn dump_survives_a_file_round_trip() {
    let cell = CellType::Tlc;
    let g = Geometry { wordlines_per_block: 6, page_bytes: 256, spare_bytes: 32, ..Geometry::default() };
    let mut array = FlashArray::new(g, cell).unwrap();
    let r = Randomizer::standard(Mode::Tailcut, &ErrorProfile::default_for(cell), 9).unwrap();
    let mut rng = common::rng(4);
    starsim::ssd::program_random(&mut array, &r, &mut rng).unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    write_dump(&array, std::fs::File::create(file.path()).unwrap()).unwrap();
    let back = read_dump(std::fs::File::open(file.path()).unwrap()).unwrap();
    assert_eq!(back, array);
    for wl in 0..g.wordlines_per_block {
        let a = WlAddr { chip: 0, block: 0, wl };
        assert_eq!(r.read_wordline(&back, a).unwrap(), r.read_wordline(&array, a).unwrap());
    }
}
