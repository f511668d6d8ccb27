//! The fast acceptance criteria. `shearmix validate` runs all eleven.

use shearmix::validate::{run_criterion, table};

fn main() {
    let outcomes: Vec<_> = [1, 2, 3, 7, 11].into_iter().map(|id| run_criterion(id, 7)).collect();
    print!("{}", table(&outcomes));
}
