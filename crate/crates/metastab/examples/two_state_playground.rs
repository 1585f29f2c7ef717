//! The smallest possible tour: a two-state chain where every quantity has
//! a closed form, computed both ways.

use metastab::chain::{build_chain, tv_distance, Measure};
use metastab::potential;

fn main() -> metastab::Result<()> {
    let chain = build_chain(
        vec!["a".into(), "b".into()],
        &[(0, 1, 1.0), (1, 0, 1.0)],
        1.0,
    )?;
    println!("two-state symmetric chain, rate 1 each way");
    println!("irreducible: {}", chain.is_irreducible());

    let mu = chain.stationary()?;
    println!("stationary: ({:.3}, {:.3})   [closed form (1/2, 1/2)]", mu.get(0), mu.get(1));

    // transient law from delta_a: p_t(a) = 1/2 + e^{-2t}/2
    for &t in &[0.1, 0.5, 2.0] {
        let dist = chain.transient_distribution(&Measure::dirac(2, 0), t)?;
        let exact = 0.5 + 0.5 * (-2.0 * t).exp();
        println!(
            "t = {t:>4}: P_a[xi(t) = a] = {:.10}   closed form {:.10}",
            dist.get(0),
            exact
        );
    }

    // worst-case TV decay and the mixing time at threshold 1/(2e)
    let dist = chain.transient_distribution(&Measure::dirac(2, 0), 0.5)?;
    println!(
        "TV(delta_a S(1/2), mu) = {:.8}   [= e^{{-1}}/2 = {:.8}]",
        tv_distance(&dist, &mu)?,
        0.5 * (-1.0f64).exp()
    );
    let tmix = potential::mixing_time(&chain, potential::DEFAULT_MIXING_THRESHOLD)?;
    println!("mixing time = {tmix:.5}   [closed form 1/2]");

    // occupation of b on [0, 1] from a: t/2 - (1 - e^{-2t})/4
    let occ = chain.occupation_time(&Measure::dirac(2, 0), &[1], 1.0)?;
    let exact = 0.5 - (1.0 - (-2.0f64).exp()) / 4.0;
    println!("E_a[time in b on [0,1]] = {occ:.10}   closed form {exact:.10}");

    // capacity between the two states: mu(a) lambda(a) P_a[H_b < H+_a] = 1/2
    let cap = potential::capacity(&chain, &[0], &[1])?;
    println!("Cap(a, b) = {:.6}   [closed form 1/2]", cap.value);
    println!(
        "Dirichlet upper {:.6}, Thomson lower {:.6} (both tight at the optimizers)",
        cap.dirichlet_upper.unwrap(),
        cap.thomson_lower.unwrap()
    );

    let gap = potential::spectral_gap(&chain)?;
    println!("spectral gap = {:.6}   [closed form r_ab + r_ba = 2]", gap.gap);
    Ok(())
}
