use ndarray::Array2;
use proptest::prelude::*;

use biphoton_core::io::{read_grid, write_diagonal_series, write_grid, write_intensity_series};
use biphoton_core::{Error, Lattice, TwoPhotonState, C64};

fn any_grid(m: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3f64..1e3), m * m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_roundtrip_is_bit_exact((m, a, b) in (1usize..7).prop_flat_map(|m| (Just(m), any_grid(m), any_grid(m)))) {
        let lat = Lattice::with_cells(m).unwrap();
        let to_grid = |v: &[(f64, f64)]| Array2::from_shape_fn((m, m), |(i, j)| {
            let (re, im) = v[i * m + j];
            C64::new(re, im)
        });
        let s = TwoPhotonState::from_grids(lat, to_grid(&a), to_grid(&b), 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        write_grid(&p, &s).unwrap();
        let back = read_grid(&p, lat, 0.0).unwrap();
        for (x, y) in back.psi_omega().iter().zip(s.psi_omega()).chain(back.psi_e().iter().zip(s.psi_e())) {
            prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
            prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }
}

#[test]
fn series_rows_are_ordered_by_time_then_cell() {
    let lat = Lattice::with_cells(3).unwrap();
    let g = Array2::from_elem((3, 3), C64::new(0.25, -0.5));
    let states: Vec<_> = (0..4)
        .map(|n| TwoPhotonState::from_grids(lat, g.clone(), g.clone(), n as f64).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    for diagonal in [true, false] {
        let p = dir.path().join("s.csv");
        if diagonal {
            write_diagonal_series(&p, &states).unwrap();
        } else {
            write_intensity_series(&p, &states).unwrap();
        }
        let text = std::fs::read_to_string(&p).unwrap();
        let keys: Vec<(f64, usize)> = text
            .lines()
            .skip(1)
            .map(|line| {
                let mut it = line.split(',');
                (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
            })
            .collect();
        assert_eq!(keys.len(), 12);
        assert!(keys.windows(2).all(|w| w[0].partial_cmp(&w[1]) == Some(std::cmp::Ordering::Less)));
    }
}

#[test]
fn malformed_grids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let lat = Lattice::with_cells(2).unwrap();
    let header = "l,lprime,re_psi_omega,im_psi_omega,re_psi_e,im_psi_e\n";
    let row = |l, lp| format!("{l},{lp},1e0,0e0,0e0,0e0\n");
    let cases = [
        ("bad_header.csv", format!("a,b,c,d,e,f\n{}", row(0, 0))),
        ("missing.csv", format!("{header}{}{}{}", row(0, 0), row(0, 1), row(1, 0))),
        ("repeat.csv", format!("{header}{}{}{}{}", row(0, 0), row(0, 0), row(1, 0), row(1, 1))),
        ("range.csv", format!("{header}{}{}{}{}", row(0, 0), row(0, 1), row(1, 0), row(2, 1))),
        ("number.csv", format!("{header}0,0,x,0,0,0\n")),
    ];
    for (name, body) in cases {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        assert!(matches!(read_grid(&p, lat, 0.0), Err(Error::Csv { .. })), "{name}");
    }
    assert!(matches!(read_grid(dir.path().join("absent.csv"), lat, 0.0), Err(Error::Io { .. })));
}
