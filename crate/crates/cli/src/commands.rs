use std::fs;
use std::io::{IsTerminal, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use specdec::analysis::{
    estimate_alpha_on_corpus, estimate_lenient_alpha, sweep as run_sweep, CostModel, SweepGrid,
    SweepKind,
};
use specdec::distmath::TokenId;
use specdec::engine::{speculative_beam_search, standard_beam_search, Beam, Mutation, SpecConfig};
use specdec::harness::{
    equivalence_test, exact_step_distribution, exp_emp_table, geometric_fit_test,
    random_distribution, simulate_walltime_runs, RejectionRow,
};
use specdec::models::{save_model, train_ngram, LanguageModel, NGramModel, Tokenizer};
use specdec::report::Table;
use specdec::{SamplingPolicy, Stream};

use crate::model_spec::{build_draft, build_target, resolve_tokenizer, vocab_path, ModelSpec};
use crate::trace::render_step;
use crate::{
    AlphaArgs, BeamArgs, ColorChoice, DecodeArgs, SamplingArgs, SimulateArgs, Suite, SweepArgs,
    TrainArgs, TrainTokenizer, Verdict, VerifyArgs,
};

fn config_value<A: Serialize>(command: &str, seed: u64, args: &A) -> serde_json::Value {
    json!({ "command": command, "seed": seed, "args": args })
}

fn header<A: Serialize>(command: &str, seed: u64, args: &A) -> String {
    format!("# config: {}", config_value(command, seed, args))
}

fn policy(args: &SamplingArgs) -> Result<SamplingPolicy> {
    if args.argmax {
        if args.temperature != 1.0 || args.top_k.is_some() || args.top_p.is_some() {
            bail!("--argmax cannot be combined with --temperature, --top-k or --top-p");
        }
        return Ok(SamplingPolicy::argmax());
    }
    let mut p = SamplingPolicy::standard().with_temperature(args.temperature);
    if let Some(k) = args.top_k {
        p = p.with_top_k(k);
    }
    if let Some(top_p) = args.top_p {
        p = p.with_top_p(top_p);
    }
    Ok(p)
}

/// Target plus an optional separate draft; `None` means the draft is the target.
struct ModelPair {
    target: Box<dyn LanguageModel>,
    draft: Option<Box<dyn LanguageModel>>,
}

impl ModelPair {
    fn load(target: &ModelSpec, draft: &ModelSpec) -> Result<Self> {
        let target = build_target(target)?;
        let draft = build_draft(draft, target.vocab_size())?;
        Ok(ModelPair { target, draft })
    }

    fn target(&self) -> &dyn LanguageModel {
        self.target.as_ref()
    }

    fn draft(&self) -> &dyn LanguageModel {
        self.draft.as_deref().unwrap_or(self.target.as_ref())
    }
}

/// Prompt tokens, starting with the tokenizer's BOS token when it has one.
fn encode_prompt(tokenizer: &Tokenizer, prompt: &str) -> Result<Vec<TokenId>> {
    let mut tokens: Vec<TokenId> = tokenizer.bos().into_iter().collect();
    tokens.extend(tokenizer.encode(prompt)?);
    Ok(tokens)
}

pub fn train(args: &TrainArgs, seed: u64) -> Result<Verdict> {
    let bytes = fs::read(&args.corpus).with_context(|| format!("reading {}", args.corpus.display()))?;
    let text = || {
        String::from_utf8(bytes.clone()).map_err(|_| anyhow!("{} is not valid UTF-8", args.corpus.display()))
    };
    let tokenizer = match args.tokenizer {
        TrainTokenizer::Byte => Tokenizer::Byte,
        TrainTokenizer::Word => Tokenizer::word_from_corpus(&text()?),
        TrainTokenizer::Ids => {
            let text = text()?;
            let largest = text
                .split_whitespace()
                .map(|w| w.parse::<u32>().map_err(|_| anyhow!("not a token id: {w:?}")))
                .try_fold(0u32, |m, id| id.map(|id| m.max(id)))?;
            Tokenizer::Ids { vocab_size: args.vocab.unwrap_or(largest as usize + 1) }
        }
    };

    let mut tokens = Vec::new();
    for line in bytes.split(|&b| b == b'\n').filter(|l| !l.iter().all(u8::is_ascii_whitespace)) {
        tokens.extend(tokenizer.bos());
        match tokenizer {
            Tokenizer::Byte => tokens.extend(line.iter().map(|&b| TokenId(b as u32))),
            _ => tokens.extend(tokenizer.encode(std::str::from_utf8(line)?)?),
        }
        tokens.extend(tokenizer.eos());
    }
    let model = train_ngram(&tokens, args.order, args.smoothing, tokenizer.vocab_size())?;
    save_model(&model, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if matches!(tokenizer, Tokenizer::Word { .. }) {
        tokenizer.save_word_vocab(&vocab_path(&args.out))?;
    }
    let size = fs::metadata(&args.out)?.len();
    println!("{}", header("train", seed, args));
    println!(
        "trained order-{} model: vocab {}, contexts {}, corpus tokens {}, file bytes {}",
        model.order(),
        tokenizer.vocab_size(),
        model.num_contexts(),
        tokens.len(),
        size
    );
    Ok(Verdict::Pass)
}

pub fn decode(args: &DecodeArgs, seed: u64) -> Result<Verdict> {
    let models = ModelPair::load(&args.target, &args.draft)?;
    let vocab = models.target().vocab_size();
    let tokenizer = resolve_tokenizer(args.tokenizer, &args.target, vocab)?;
    let prompt = encode_prompt(&tokenizer, &args.prompt)?;
    let mut config = SpecConfig::default()
        .with_gamma(args.gamma)
        .with_lenience(args.lenience)
        .with_policy(policy(&args.sampling)?)
        .with_seed(seed)
        .with_max_new_tokens(args.max_tokens);
    config.bos_token = tokenizer.bos();
    config.stop_token = match (args.stop_token, args.stop_at_eos) {
        (Some(id), _) => Some(TokenId(id)),
        (None, true) => {
            Some(tokenizer.eos().ok_or_else(|| anyhow!("tokenizer has no end-of-sequence token"))?)
        }
        (None, false) => None,
    };
    let result = specdec::decode(models.target(), models.draft(), &prompt, &config)?;

    let mut out = std::io::stdout().lock();
    if args.json {
        let doc = json!({ "config": config_value("decode", seed, args), "result": result });
        writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
        return Ok(Verdict::Pass);
    }
    writeln!(out, "{}", header("decode", seed, args))?;
    if args.trace {
        let color = match args.color {
            ColorChoice::Always => true,
            ColorChoice::Never => false,
            ColorChoice::Auto => std::io::stdout().is_terminal(),
        };
        for (i, step) in result.traces.iter().enumerate() {
            writeln!(out, "step {:>4} | {}", i + 1, render_step(step, &tokenizer, color))?;
        }
    } else {
        writeln!(out, "{}", tokenizer.decode(&result.tokens))?;
    }
    let t = &result.totals;
    writeln!(
        out,
        "# tokens {}, steps {}, target calls {}, draft calls {}, acceptance {}",
        t.tokens_emitted,
        t.steps,
        t.target_calls,
        t.draft_calls,
        result.acceptance_rate().map_or("n/a".to_string(), |r| format!("{r:.4}"))
    )?;
    Ok(Verdict::Pass)
}

fn verdict_line(passed: bool) -> Verdict {
    println!("verdict: {}", if passed { "PASS" } else { "FAIL" });
    if passed {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

pub fn verify(args: &VerifyArgs, seed: u64) -> Result<Verdict> {
    let mutation: Mutation = args.mutate.parse().map_err(|e: String| anyhow!(e))?;
    if mutation != Mutation::None && args.suite != Suite::Equivalence {
        bail!("--mutate only applies to the equivalence suite");
    }
    if args.vocab < 2 {
        bail!("--vocab must be at least 2");
    }
    println!("{}", header("verify", seed, args));
    let mut rng = Stream::new(seed);
    match args.suite {
        Suite::Exactness => {
            let pairs = args.pairs.unwrap_or(1000);
            let l = args.lenience;
            if !(l > 0.0 && l <= 1.0) {
                bail!("--lenience must be in (0, 1]");
            }
            let mut worst = 0.0f64;
            for i in 0..pairs {
                let n = 2 + rng.below(args.vocab - 1);
                let zeros = if i % 2 == 0 { 0.0 } else { 0.3 };
                let p = random_distribution(&mut rng, n, zeros);
                let q = random_distribution(&mut rng, n, zeros);
                let out = exact_step_distribution(&p, &q, l)?;
                for (o, pp) in out.probs().iter().zip(p.probs()) {
                    let dev = if l == 1.0 { (o - pp).abs() } else { o - pp / l };
                    worst = worst.max(dev);
                }
            }
            if l == 1.0 {
                println!("pairs: {pairs}\nmax |output - target|: {worst:.3e}");
            } else {
                println!("pairs: {pairs}\nlenience: {l}\nmax excess over target/lenience: {worst:.3e}");
            }
            Ok(verdict_line(worst < 1e-12))
        }
        Suite::Equivalence => {
            let target = NGramModel::random(2, args.vocab, 0.05, 2.0, &mut rng)?;
            let draft = NGramModel::random(2, args.vocab, 0.05, 2.0, &mut rng)?;
            let contexts: Vec<Vec<TokenId>> = (0..args.contexts.max(1))
                .map(|i| vec![TokenId::from_index(i * args.vocab / args.contexts.max(1))])
                .collect();
            let config = SpecConfig::default()
                .with_gamma(args.gamma.unwrap_or(3))
                .with_seed(seed)
                .with_mutation(mutation);
            let report = equivalence_test(&target, &draft, &config, args.samples, &contexts, args.threshold)?;
            for (ctx, t) in contexts.iter().zip(&report.tests) {
                println!(
                    "context {:>3}: chi2 {:.3} df {} p {:.4e}",
                    ctx[0].0, t.statistic, t.df, t.p_value
                );
            }
            println!(
                "samples per arm: {}\ncombined p (Bonferroni): {:.4e}\nmax tv: {:.5}\nthreshold: {}",
                report.n_samples, report.combined_p_value, report.max_tv, report.threshold
            );
            Ok(verdict_line(report.passed))
        }
        Suite::Geometric => {
            let gamma = args.gamma.unwrap_or(5);
            let report = geometric_fit_test(args.alpha, gamma, args.steps, seed, args.threshold)?;
            let t = &report.tests[0];
            let m = report.mean.expect("geometric report carries a mean check");
            println!(
                "alpha: {}\ngamma: {gamma}\nsteps: {}\nmean tokens per step: {:.5} (expected {:.5}, error {:.3}%)\nchi2 {:.3} df {} p {:.4e}",
                args.alpha,
                report.n_samples,
                m.observed,
                m.expected,
                m.relative_error * 100.0,
                t.statistic,
                t.df,
                t.p_value
            );
            Ok(verdict_line(report.passed))
        }
        Suite::Rejection => {
            let pairs = args.pairs.unwrap_or(10_000);
            let (mut violations, mut sum_spec, mut sum_rej) = (0usize, 0.0, 0.0);
            for _ in 0..pairs {
                let n = 2 + rng.below(args.vocab - 1);
                let p = random_distribution(&mut rng, n, 0.0);
                let q = random_distribution(&mut rng, n, 0.0);
                let row = RejectionRow::from_pair(&p, &q)?;
                let strict = p.probs() == q.probs() || row.rejection < row.speculative;
                if !row.ordered || !strict {
                    violations += 1;
                }
                sum_spec += row.speculative;
                sum_rej += row.rejection;
            }
            println!(
                "pairs: {pairs}\nmean speculative acceptance: {:.4}\nmean rejection acceptance: {:.4}\nviolations: {violations}",
                sum_spec / pairs as f64,
                sum_rej / pairs as f64
            );
            Ok(verdict_line(violations == 0))
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, name: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| v.trim().parse().map_err(|_| anyhow!("--{name}: bad value {v:?}")))
        .collect()
}

/// `START:STOP:STEP` (inclusive) or a comma list.
fn parse_alphas(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return parse_list(s, "alphas");
    }
    let [start, stop, step] = [parts[0], parts[1], parts[2]]
        .map(|v| v.trim().parse::<f64>().map_err(|_| anyhow!("--alphas: bad value {v:?}")));
    let (start, stop, step) = (start?, stop?, step?);
    if !(step > 0.0) || stop < start {
        bail!("--alphas: need START <= STOP and STEP > 0");
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
}

fn write_csv(path: Option<&Path>, header_line: &str, table: &Table) -> Result<()> {
    let body = format!("{header_line}\n{}", table.to_csv());
    match path {
        Some(p) => {
            fs::write(p, body).with_context(|| format!("writing {}", p.display()))?;
            println!("wrote {} rows to {}", table.rows.len(), p.display());
        }
        None => print!("{body}"),
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs, seed: u64) -> Result<Verdict> {
    let kind: Option<SweepKind> = args.kind.as_deref().map(str::parse).transpose().map_err(|e: String| anyhow!(e))?;
    if kind.is_none() && !args.table1 {
        bail!("give a sweep kind (fig2, fig3, fig4, table1) or --table1");
    }
    let mut grid = SweepGrid::default();
    if let Some(a) = &args.alphas {
        grid.alphas = parse_alphas(a)?;
    }
    if let Some(g) = &args.gammas {
        grid.gammas = parse_list(g, "gammas")?;
    }
    if let Some(c) = &args.cs {
        grid.cs = parse_list(c, "cs")?;
    }
    if let Some(m) = args.gamma_max {
        grid.gamma_max = m;
    }
    let head = header("sweep", seed, args);
    if args.table1 {
        let table = run_sweep(SweepKind::Table1, &grid)?;
        if args.out.is_some() || kind.is_some() {
            println!("{head}");
        }
        print!("{}", table.to_text(2));
    }
    if let Some(kind) = kind {
        let table = run_sweep(kind, &grid)?;
        write_csv(args.out.as_deref(), &head, &table)?;
    }
    Ok(Verdict::Pass)
}

pub fn simulate(args: &SimulateArgs, seed: u64) -> Result<Verdict> {
    let models = ModelPair::load(&args.target, &args.draft)?;
    let cost = CostModel::new(args.c, args.c_hat.unwrap_or(args.c));
    let config = SpecConfig::default().with_gamma(args.gamma).with_lenience(args.lenience).with_seed(seed);
    let r = simulate_walltime_runs(models.target(), models.draft(), &cost, &config, args.n_tokens, args.runs)?;
    let head = header("simulate", seed, args);
    println!("{head}");
    println!("alpha_hat: {:.5}", r.alpha_hat);
    println!("exp (closed form): {:.5}", r.theoretical_speedup);
    println!("emp (simulated): {:.5}", r.empirical_speedup);
    println!("gap: {:.3}%", r.relative_gap * 100.0);
    println!("ops factor (closed form): {:.5}", r.theoretical_ops);
    println!("ops factor (simulated): {:.5}", r.empirical_ops);
    println!("memory access factor: {:.5}", r.memory_factor);
    let target_calls: usize = r.runs.iter().map(|s| s.target_calls).sum();
    let draft_calls: usize = r.runs.iter().map(|s| s.draft_calls).sum();
    println!("tokens: {}, target calls: {target_calls}, draft calls: {draft_calls}", r.emitted_tokens);
    let table = exp_emp_table(&[(args.task.clone(), r)]);
    print!("{}", table.to_text(3));
    if let Some(path) = &args.csv {
        write_csv(Some(path), &head, &table)?;
    }
    Ok(Verdict::Pass)
}

fn same_beams(a: &[Beam], b: &[Beam]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| x.tokens == y.tokens && x.score.to_bits() == y.score.to_bits())
}

fn beam_text(tokenizer: &Tokenizer, beam: &Beam) -> String {
    beam.tokens.iter().map(|&t| tokenizer.token_text(t)).collect::<Vec<_>>().join(tokenizer.joiner())
}

pub fn beam(args: &BeamArgs, seed: u64) -> Result<Verdict> {
    let models = ModelPair::load(&args.target, &args.draft)?;
    let vocab = models.target().vocab_size();
    let tokenizer = resolve_tokenizer(args.tokenizer, &args.target, vocab)?;
    println!("{}", header("beam", seed, args));
    let run = |prompt: &[TokenId]| -> Result<_> {
        let spec = speculative_beam_search(
            models.target(),
            models.draft(),
            prompt,
            args.width,
            args.draft_width,
            args.gamma,
            args.steps,
        )?;
        let plain = standard_beam_search(models.target(), prompt, args.width, args.steps)?;
        Ok((spec, plain))
    };

    if args.random_prompts > 0 {
        let mut rng = Stream::new(seed);
        let (mut mismatches, mut drafted, mut accepted) = (0, 0, 0);
        for _ in 0..args.random_prompts {
            let len = 1 + rng.below(3);
            let prompt: Vec<TokenId> = (0..len).map(|_| TokenId::from_index(rng.below(vocab))).collect();
            let (spec, plain) = run(&prompt)?;
            if !same_beams(&spec.beams, &plain) {
                mismatches += 1;
            }
            drafted += spec.blocks.iter().map(|b| b.drafted_steps).sum::<usize>();
            accepted += spec.blocks.iter().map(|b| b.accepted_steps).sum::<usize>();
        }
        println!(
            "prompts: {}\nmismatches: {mismatches}\ndraft step acceptance: {:.4}",
            args.random_prompts,
            if drafted > 0 { accepted as f64 / drafted as f64 } else { 0.0 }
        );
        return Ok(if mismatches == 0 {
            println!("verdict: identical");
            Verdict::Pass
        } else {
            println!("verdict: DIFFERENT");
            Verdict::Fail
        });
    }

    let mut prompt = encode_prompt(&tokenizer, &args.prompt)?;
    if prompt.is_empty() {
        prompt.push(TokenId(0));
    }
    let (spec, plain) = run(&prompt)?;
    println!("{:>4} | {:<40} | {:<40}", "rank", "speculative", "standard");
    for (i, (s, p)) in spec.beams.iter().zip(&plain).enumerate() {
        println!(
            "{:>4} | {:<40} | {:<40}",
            i + 1,
            format!("{} ({:.4})", beam_text(&tokenizer, s), s.score),
            format!("{} ({:.4})", beam_text(&tokenizer, p), p.score)
        );
    }
    for (i, b) in spec.blocks.iter().enumerate() {
        println!(
            "block {:>3}: drafted {} accepted {} advanced {} target prefixes {}",
            i + 1,
            b.drafted_steps,
            b.accepted_steps,
            b.advanced,
            b.target_prefixes
        );
    }
    println!(
        "target calls: {} (standard: {}), draft calls: {}, acceptance: {}",
        spec.target_calls,
        args.steps,
        spec.draft_calls,
        spec.acceptance_rate().map_or("n/a".to_string(), |r| format!("{r:.4}"))
    );
    Ok(if same_beams(&spec.beams, &plain) {
        println!("verdict: identical");
        Verdict::Pass
    } else {
        println!("verdict: DIFFERENT");
        Verdict::Fail
    })
}

pub fn alpha(args: &AlphaArgs, seed: u64) -> Result<Verdict> {
    let models = ModelPair::load(&args.target, &args.draft)?;
    let vocab = models.target().vocab_size();
    let tokenizer = resolve_tokenizer(args.tokenizer, &args.target, vocab)?;
    let policy = policy(&args.sampling)?;
    let estimate = match &args.corpus {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let tokens = encode_prompt(&tokenizer, &text)?;
            estimate_alpha_on_corpus(models.target(), models.draft(), &tokens, &policy, args.lenience)?
        }
        None => {
            let prompt = encode_prompt(&tokenizer, "")?;
            let prompts = if prompt.is_empty() { vec![vec![TokenId(0)]] } else { vec![prompt] };
            estimate_lenient_alpha(
                models.target(),
                models.draft(),
                &prompts,
                args.n_tokens,
                &policy,
                args.lenience,
                seed,
            )?
        }
    };
    println!("{}", header("alpha", seed, args));
    println!(
        "alpha: {:.5}\nstd error: {:.5}\npositions: {}",
        estimate.alpha, estimate.std_error, estimate.n_tokens
    );
    Ok(Verdict::Pass)
}
