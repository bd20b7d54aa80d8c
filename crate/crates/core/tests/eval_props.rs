use catforge::eval::{pass_at, TrialMatrix};
use num_rational::Ratio;
use proptest::prelude::*;

/// Mean over rows of the fraction of size-k column subsets with a success,
/// by enumerating the subsets.
fn brute_force(cells: &[Vec<u8>], k: usize) -> Ratio<u128> {
    let n = cells[0].len();
    let subsets: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() as usize == k).collect();
    let mut total = Ratio::from_integer(0u128);
    for row in cells {
        let hits = subsets.iter().filter(|&&m| (0..n).any(|j| m & (1 << j) != 0 && row[j] == 1)).count();
        total += Ratio::new(hits as u128, subsets.len() as u128);
    }
    total / Ratio::from_integer(cells.len() as u128)
}

fn matrix(trials: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(0u8..2, trials), 1..40)
}

proptest! {
    #[test]
    fn closed_form_equals_enumeration(cells in (1usize..7).prop_flat_map(matrix)) {
        let m = TrialMatrix::from_cells(cells.clone()).unwrap();
        for k in 1..=m.trials() {
            prop_assert_eq!(pass_at(&m, k).unwrap(), brute_force(&cells, k));
        }
    }

    #[test]
    fn pass_at_is_monotone_in_k(cells in (1usize..9).prop_flat_map(matrix)) {
        let m = TrialMatrix::from_cells(cells).unwrap();
        let values: Vec<_> = (1..=m.trials()).map(|k| pass_at(&m, k).unwrap()).collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn protocol_examples() {
    let m = TrialMatrix::from_cells(vec![vec![0; 4]; 10]).unwrap();
    assert_eq!(pass_at(&m, 1).unwrap(), Ratio::from_integer(0));
    assert_eq!(pass_at(&m, 4).unwrap(), Ratio::from_integer(0));
    // pass@1 is the cell mean; pass@trials is the share of rows with a success.
    let m = TrialMatrix::from_cells(vec![vec![1, 0, 0, 0], vec![0, 0, 0, 0], vec![1, 1, 0, 1]]).unwrap();
    assert_eq!(pass_at(&m, 1).unwrap(), Ratio::new(4, 12));
    assert_eq!(pass_at(&m, 4).unwrap(), Ratio::new(2, 3));
}
