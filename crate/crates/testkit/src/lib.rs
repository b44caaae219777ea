//! Test support shared by the workspace's test suites.
//!
//! The Borda oracle here is a literal transcription of the ranking procedure
//! over plain data. It deliberately shares no code or types with
//! `bonsai-core` so it can serve as an independent check on `rank_feed`.

use std::cmp::Reverse;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rational = Ratio<i64>;

/// One candidate post reduced to what ranking looks at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OraclePost {
    pub uri: String,
    /// Seconds since some epoch; only the order matters.
    pub created_at: i64,
    /// Curation score; `None` or `Some(0)` means the post was excluded.
    pub score: Option<u8>,
    pub likes: u64,
    pub reposts: u64,
    pub replies: u64,
}

impl OraclePost {
    fn included(&self) -> bool {
        matches!(self.score, Some(s) if s > 0)
    }
}

/// Weight triple in tenths: `(4, 3, 3)` is (0.4, 0.3, 0.3).
pub type Tenths = (i64, i64, i64);

/// Every triple on the 0.1-step simplex (66 of them).
pub fn simplex_tenths() -> Vec<Tenths> {
    let mut out = Vec::new();
    for r in 0..=10 {
        for p in 0..=(10 - r) {
            out.push((r, p, 10 - r - p));
        }
    }
    out
}

/// Finds the 1-based position of `uri` in an already sorted list.
fn position(sorted: &[&OraclePost], uri: &str) -> i64 {
    for (i, p) in sorted.iter().enumerate() {
        if p.uri == uri {
            return i as i64 + 1;
        }
    }
    panic!("{uri} missing from ranking")
}

/// Brute-force weighted Borda ranking. Returns `(uri, aggregate)` pairs in
/// output order.
pub fn borda_oracle(posts: &[OraclePost], weights: (Rational, Rational, Rational)) -> Vec<(String, Rational)> {
    let (w_r, w_p, w_c) = weights;

    // Phase 1: three individual rankings. Each sort key carries the tie-break
    // (newer first, then uri ascending) after the ranked value.
    let mut relevance: Vec<&OraclePost> = posts.iter().filter(|p| p.included()).collect();
    relevance.sort_by_key(|p| (Reverse(p.score.unwrap()), Reverse(p.created_at), p.uri.clone()));

    let mut recency: Vec<&OraclePost> = posts.iter().collect();
    recency.sort_by_key(|p| (Reverse(p.created_at), Reverse(p.created_at), p.uri.clone()));

    let mut engagement: Vec<&OraclePost> = posts.iter().collect();
    engagement.sort_by_key(|p| {
        let e = p.likes + 3 * p.reposts + 2 * p.replies;
        (Reverse(e), Reverse(p.created_at), p.uri.clone())
    });

    // Phase 2: weighted aggregation over the eligible posts.
    let mut final_scores: Vec<(&OraclePost, Rational)> = Vec::new();
    for p in &relevance {
        let r_r = Rational::from_integer(position(&relevance, &p.uri));
        let r_c = Rational::from_integer(position(&recency, &p.uri));
        let r_e = Rational::from_integer(position(&engagement, &p.uri));
        final_scores.push((p, w_r * r_r + w_p * r_e + w_c * r_c));
    }
    final_scores
        .sort_by(|(pa, sa), (pb, sb)| sa.cmp(sb).then(pb.created_at.cmp(&pa.created_at)).then(pa.uri.cmp(&pb.uri)));
    final_scores.into_iter().map(|(p, s)| (p.uri.clone(), s)).collect()
}

pub fn tenths_to_rationals(t: Tenths) -> (Rational, Rational, Rational) {
    (Rational::new(t.0, 10), Rational::new(t.1, 10), Rational::new(t.2, 10))
}

/// Seeded generator of small candidate sets. Values are drawn from narrow
/// ranges so that ties in every dimension are common.
pub struct InstanceGenerator {
    rng: ChaCha8Rng,
}

impl InstanceGenerator {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn instance(&mut self, max_size: usize) -> Vec<OraclePost> {
        let n = self.rng.gen_range(0..=max_size);
        self.instance_of_size(n)
    }

    pub fn instance_of_size(&mut self, n: usize) -> Vec<OraclePost> {
        let mut names: Vec<char> = "abcdefghijklmnop".chars().collect();
        names.shuffle(&mut self.rng);
        (0..n)
            .map(|i| OraclePost {
                uri: format!("at://did:plc:gen/app.bsky.feed.post/{}", names[i]),
                created_at: 1_700_000_000 + 60 * self.rng.gen_range(0..4),
                score: match self.rng.gen_range(0..12) {
                    11 => None,
                    s => Some(s as u8),
                },
                likes: self.rng.gen_range(0..4),
                reposts: self.rng.gen_range(0..2),
                replies: self.rng.gen_range(0..2),
            })
            .collect()
    }

    /// Like [`instance_of_size`](Self::instance_of_size) but every post is
    /// eligible and timestamps/engagements are distinct.
    pub fn distinct_eligible(&mut self, n: usize) -> Vec<OraclePost> {
        let mut times: Vec<i64> = (0..n as i64).map(|i| 1_700_000_000 + 60 * i).collect();
        let mut likes: Vec<u64> = (0..n as u64).map(|i| i * 10).collect();
        times.shuffle(&mut self.rng);
        likes.shuffle(&mut self.rng);
        (0..n)
            .map(|i| OraclePost {
                uri: format!("at://did:plc:gen/app.bsky.feed.post/{i:03}"),
                created_at: times[i],
                score: Some(self.rng.gen_range(1..=10)),
                likes: likes[i],
                reposts: 0,
                replies: 0,
            })
            .collect()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
