//! Prints the derivation table of the built-in example as Markdown.
//!
//! ```text
//! cargo run -p pomdp-lab --example builtin_derivation > docs/builtin_example.md
//! ```

use pomdp_lab::limits::{evaluate, gamma_convergence_sweep, sensor_grid_policies};
use pomdp_lab::{builtin_example, simplex_grid, solve_value, EvalMode, Policy64, DEFAULT_GAMMAS};

fn fmt_row(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2}")).collect();
    format!("({})", parts.join(", "))
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

fn main() -> pomdp_lab::Result<()> {
    let ex = builtin_example::<f64>();
    let p = &ex.pomdp;
    let s = ex.sensor;
    let fixed = Policy64::uniform(3, 3);

    println!("# Built-in example\n");
    println!("Generated by `cargo run -p pomdp-lab --example builtin_derivation`.\n");
    println!("## Structure\n");
    println!("Four world states, three sensor values, three actions. Indices are 0-based.\n");
    println!("| world state | sensor value | notes |");
    println!("|---|---|---|");
    println!("| 0 | 0 | every action has the same outcome and reward |");
    println!("| 1 | 1 | every action has the same outcome and reward |");
    println!("| 2 | 2 | shares sensor value 2 with world state 3 |");
    println!("| 3 | 2 | shares sensor value 2 with world state 2 |");
    println!("\nIn 1-based notation world states 0, 2, 3, 1 are states 1, 2, 3, 4 and sensor");
    println!("values 0, 2, 1 are values 1, 2, 3.\n");

    println!("## Constants\n");
    println!("| w | a | alpha(w, a, .) | R(w, a) |");
    println!("|---|---|---|---|");
    for w in 0..4 {
        for a in 0..3 {
            println!(
                "| {w} | {a} | {} | {:.1} |",
                fmt_row(p.alpha(w, a)),
                p.reward()[(w, a)]
            );
        }
    }
    println!("\nThe observation kernel is deterministic. All transition probabilities are");
    println!("positive, so every policy gives an irreducible aperiodic chain.\n");

    println!("## How the constants were chosen\n");
    println!("Candidates were drawn at random with two-decimal positive transition rows and");
    println!(
        "rewards in [-1, 1] on a 0.1 lattice, keeping world states 0 and 1 action-independent."
    );
    println!("A candidate was kept when");
    println!("* the immediate rewards of world states 2 and 3 favor different actions,");
    println!("* with the other rows uniform and `mu` uniform, the resolution-40 grid maximizer of");
    println!("  row 2 has exactly two positive entries, each at least 0.2, both at `gamma = 0.6`");
    println!("  and for the average reward,");
    println!(
        "* the greedy actions of world states 2 and 3 at that maximizer differ from its support."
    );
    println!("The first candidate meeting all three is the one frozen here.\n");

    println!("## Grid maximizer of row {s}\n");
    println!("Other rows uniform, `mu` uniform, 861 grid points.\n");
    println!("| gamma | argmax | support | max reward | sup gap |");
    println!("|---|---|---|---|---|");
    let grid = simplex_grid::<f64>(3, 40)?;
    let pols = sensor_grid_policies(&fixed, s, &grid)?;
    let gammas: Vec<f64> = DEFAULT_GAMMAS.to_vec();
    let sweep = gamma_convergence_sweep(p, &ex.mu, &pols, &gammas)?;
    for (i, (id, value)) in sweep.argmax().into_iter().enumerate() {
        let q = &grid.points()[id];
        let support = q.iter().filter(|&&x| x > 0.0).count();
        println!(
            "| {} | {} | {support} | {value:.6} | {:.3e} |",
            gammas[i],
            fmt_row(q),
            sweep.sup_gap[i]
        );
    }
    let (avg_id, avg_value) = sweep.average_argmax();
    let q = &grid.points()[avg_id];
    println!(
        "| average | {} | {} | {avg_value:.6} | 0 |",
        fmt_row(q),
        q.iter().filter(|&&x| x > 0.0).count()
    );

    let mut averages: Vec<f64> = sweep.rows.iter().map(|r| r.average).collect();
    averages.sort_by(|a, b| b.total_cmp(a));
    println!(
        "\nThe three best average rewards on the grid are {:.7}, {:.7} and {:.7}.\n",
        averages[0], averages[1], averages[2]
    );

    println!("## Greedy actions against the optimal support\n");
    let gamma = 0.6;
    let (id, _) = sweep.argmax()[0];
    let q = &grid.points()[id];
    let pi = fixed.with_row(s, q)?;
    let b = solve_value(p, &pi, gamma)?;
    println!(
        "At `gamma = {gamma}` and the grid maximizer {}:\n",
        fmt_row(q)
    );
    println!("| w | Q(w,0) | Q(w,1) | Q(w,2) | greedy action |");
    println!("|---|---|---|---|---|");
    for w in [2, 3] {
        let row = b.action_values.row(w);
        println!(
            "| {w} | {:.4} | {:.4} | {:.4} | {} |",
            row[0],
            row[1],
            row[2],
            argmax(row)
        );
    }
    let support: Vec<usize> = (0..3).filter(|&a| q[a] > 0.0).collect();
    println!(
        "\nThe maximizer uses actions {support:?}, not the greedy actions of the two world states."
    );
    println!("Each vertex of the simplex is worse:\n");
    println!("| row {s} | reward at gamma = {gamma} |");
    println!("|---|---|");
    for a in 0..3 {
        let mut e = vec![0.0; 3];
        e[a] = 1.0;
        let v = evaluate(
            p,
            &ex.mu,
            &fixed.with_row(s, &e)?,
            EvalMode::Discounted(gamma),
        )?
        .0;
        println!("| {} | {v:.6} |", fmt_row(&e));
    }
    Ok(())
}
