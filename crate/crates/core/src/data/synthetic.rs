//! Two planted communities with homophilous retweeting and community-shifted features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{tweet_key, user_key, DataError, Dataset, FeatureRecord, TweetRecord, UserRecord};
use crate::labeling::{HashtagLexicon, StanceLabel, UserLabel};

const POSITIVE_TAGS: [&str; 2] = ["#voteblue", "#bluewave"];
const NEGATIVE_TAGS: [&str; 2] = ["#votered", "#redwave"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub users_per_community: usize,
    pub tweets_per_user: usize,
    pub retweets_per_user: usize,
    /// Probability that a retweet targets the retweeter's own community.
    pub p_in: f64,
    /// Community shift of tweet features along the signal direction.
    pub tweet_signal: f64,
    /// Community shift of user features.
    pub user_signal: f64,
    /// Per-coordinate Gaussian noise on tweet features.
    pub noise: f64,
    /// Per-coordinate Gaussian noise on user features.
    pub user_noise: f64,
    pub dim: usize,
    /// Probability that a tweet carries a stance hashtag.
    pub hashtag_rate: f64,
    /// Probability that a stance hashtag matches the author's community.
    pub hashtag_fidelity: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            users_per_community: 200,
            tweets_per_user: 5,
            retweets_per_user: 5,
            p_in: 0.9,
            tweet_signal: 1.0,
            user_signal: 0.2,
            noise: 0.25,
            user_noise: 0.25,
            dim: 16,
            hashtag_rate: 0.8,
            hashtag_fidelity: 0.95,
            seed: 7,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Synthetic(m));
        for (name, p) in [
            ("p_in", self.p_in),
            ("hashtag_rate", self.hashtag_rate),
            ("hashtag_fidelity", self.hashtag_fidelity),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        for (name, s) in [("noise", self.noise), ("user_noise", self.user_noise)] {
            if !(s.is_finite() && s >= 0.0) {
                return bad(format!("{name} = {s} must be finite and non-negative"));
            }
        }
        if !(self.tweet_signal.is_finite() && self.user_signal.is_finite()) {
            return bad("signal strengths must be finite".into());
        }
        if self.users_per_community == 0 {
            return bad("need at least one user per community".into());
        }
        if self.dim < 2 {
            return bad(format!("dim = {} must be at least 2", self.dim));
        }
        if self.retweets_per_user > 0 {
            let own_pool = (self.users_per_community - 1) * self.tweets_per_user;
            let other_pool = self.users_per_community * self.tweets_per_user;
            if self.p_in > 0.0 && own_pool == 0 {
                return bad("within-community retweet pool is empty".into());
            }
            if self.p_in < 1.0 && other_pool == 0 {
                return bad("cross-community retweet pool is empty".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// Labels hold the planted communities; features are embedded.
    pub dataset: Dataset,
    pub lexicon: HashtagLexicon,
    pub community: Vec<StanceLabel>,
}

impl SyntheticDataset {
    /// `(retweets within the retweeter's community, all retweets)`.
    pub fn retweet_homophily(&self) -> (usize, usize) {
        let community_of = |user: &str| {
            let i = self
                .dataset
                .users
                .iter()
                .position(|u| u.id == user)
                .expect("generated user");
            self.community[i]
        };
        let author_of = |tweet: &str| {
            &self
                .dataset
                .tweets
                .iter()
                .find(|t| t.id == tweet)
                .expect("generated tweet")
                .author_id
        };
        let mut within = 0;
        let mut total = 0;
        for t in &self.dataset.tweets {
            if let Some(orig) = &t.retweet_of {
                total += 1;
                within += usize::from(community_of(&t.author_id) == community_of(author_of(orig)));
            }
        }
        (within, total)
    }
}

/// Zero-mean unit vector `(+1, -1, +1, ...)`, so layer normalization keeps it.
fn signal_direction(dim: usize) -> Vec<f64> {
    let mut e: Vec<f64> = (0..dim).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mean = e.iter().sum::<f64>() / dim as f64;
    e.iter_mut().for_each(|x| *x -= mean);
    let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    e.iter_mut().for_each(|x| *x /= norm);
    e
}

fn shifted<R: Rng + ?Sized>(direction: &[f64], shift: f64, noise: f64, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = direction
        .iter()
        .map(|d| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            shift * d + noise * z
        })
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn sign(c: StanceLabel) -> f64 {
    match c {
        StanceLabel::Positive => 1.0,
        StanceLabel::Negative => -1.0,
    }
}

pub fn generate_synthetic(params: &SyntheticParams) -> Result<SyntheticDataset, DataError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.users_per_community;
    let direction = signal_direction(params.dim);

    let community: Vec<StanceLabel> = (0..2 * n)
        .map(|i| {
            if i < n {
                StanceLabel::Negative
            } else {
                StanceLabel::Positive
            }
        })
        .collect();
    let mut users = Vec::with_capacity(2 * n);
    let mut features = Vec::new();
    for (i, c) in community.iter().enumerate() {
        let id = format!("u{i}");
        features.push(FeatureRecord {
            node: user_key(&id),
            vec: shifted(&direction, sign(*c) * params.user_signal, params.user_noise, &mut rng),
        });
        users.push(UserRecord {
            id,
            profile: format!("synthetic account {i}"),
            location: None,
            extra: None,
        });
    }

    let mut tweets = Vec::new();
    // originals[u] holds indices into `tweets`
    let mut originals: Vec<Vec<usize>> = vec![Vec::new(); 2 * n];
    for (u, c) in community.iter().enumerate() {
        for _ in 0..params.tweets_per_user {
            let id = format!("t{}", tweets.len());
            let mut hashtags = Vec::new();
            if rng.random::<f64>() < params.hashtag_rate {
                let faithful = rng.random::<f64>() < params.hashtag_fidelity;
                let positive = (*c == StanceLabel::Positive) == faithful;
                let pool = if positive { POSITIVE_TAGS } else { NEGATIVE_TAGS };
                hashtags.push(pool[rng.random_range(0..pool.len())].to_string());
            }
            features.push(FeatureRecord {
                node: tweet_key(&id),
                vec: shifted(&direction, sign(*c) * params.tweet_signal, params.noise, &mut rng),
            });
            let mut text = format!("synthetic post {} by u{u}", tweets.len());
            for h in &hashtags {
                text.push(' ');
                text.push_str(h);
            }
            originals[u].push(tweets.len());
            tweets.push(TweetRecord {
                id,
                author_id: format!("u{u}"),
                text,
                hashtags,
                retweet_of: None,
            });
        }
    }

    let pool_of = |members: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        members.flat_map(|u| originals[u].iter().copied()).collect()
    };
    let mut retweets = Vec::new();
    for (u, c) in community.iter().enumerate() {
        let range = if *c == StanceLabel::Negative { 0..n } else { n..2 * n };
        let own = pool_of(&mut range.clone().filter(|&v| v != u));
        let other = pool_of(&mut (0..2 * n).filter(|v| !range.contains(v)));
        for _ in 0..params.retweets_per_user {
            let pool = if rng.random::<f64>() < params.p_in {
                &own
            } else {
                &other
            };
            let target = &tweets[pool[rng.random_range(0..pool.len())]];
            retweets.push(TweetRecord {
                id: format!("r{}", retweets.len()),
                author_id: format!("u{u}"),
                text: target.text.clone(),
                hashtags: target.hashtags.clone(),
                retweet_of: Some(target.id.clone()),
            });
        }
    }
    tweets.extend(retweets);

    let labels = users
        .iter()
        .zip(&community)
        .map(|(u, c)| UserLabel {
            user_id: u.id.clone(),
            f_u: None,
            label: *c,
            labeled_tweet_count: 0,
        })
        .collect();
    let lexicon = HashtagLexicon::new(
        "blue",
        POSITIVE_TAGS
            .iter()
            .map(|t| (*t, "blue"))
            .chain(NEGATIVE_TAGS.iter().map(|t| (*t, "red"))),
    )?;
    Ok(SyntheticDataset {
        dataset: Dataset {
            users,
            tweets,
            interactions: None,
            labels,
            features: Some(features),
        },
        lexicon,
        community,
    })
}
