//! Uniform without-replacement minibatches and their empirical inclusion rates.

use vrmcmc::prelude::*;

fn main() -> vrmcmc::Result<()> {
    let (population, n, draws) = (10, 3, 100_000);
    let mut sampler = IndexSampler::new(population)?;
    let mut rng = RngStream::for_chain(1, 0, Purpose::Minibatch);
    let mut hits = vec![0usize; population];
    for _ in 0..draws {
        for &i in sampler.draw(n, &mut rng)?.indices() {
            hits[i] += 1;
        }
    }
    println!("expected inclusion rate {:.4}", n as f64 / population as f64);
    for (i, h) in hits.iter().enumerate() {
        println!("index {i}: {:.4}", *h as f64 / draws as f64);
    }
    let batch = sample_without_replacement(population, n, &mut rng)?;
    println!("one batch {:?}, scale N/n = {}", batch.indices(), batch.scale());
    Ok(())
}
