use crate::error::{Error, Result};

/// The view left without a partner in a round of an odd-sized schedule. It
/// is denoised together with `partner`, whose second prediction is discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bye {
    pub view: usize,
    pub partner: usize,
}

/// Disjoint unordered pairs `(a, b)`, `a < b`, sorted by `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRound {
    pub pairs: Vec<(usize, usize)>,
    pub bye: Option<Bye>,
}

/// Rounds after which every unordered pair has met exactly once.
pub fn rounds_per_cycle(views: usize) -> usize {
    if views.is_multiple_of(2) {
        views - 1
    } else {
        views
    }
}

/// Round-robin pairing by the circle method. View 0 stays fixed while the
/// others rotate; odd counts add a phantom view whose opponent sits out.
/// Rounds repeat with period [`rounds_per_cycle`].
pub fn pair_schedule(views: usize, round: usize) -> Result<PairRound> {
    if views < 2 {
        return Err(Error::invalid(format!(
            "pair scheduling needs at least 2 views, got {views}"
        )));
    }
    let players = views + views % 2;
    let ring = players - 1;
    let r = round % ring;
    let rotated = |k: usize| 1 + (k + r) % ring;

    let mut raw = Vec::with_capacity(players / 2);
    raw.push((0, rotated(0)));
    for k in 1..players / 2 {
        raw.push((rotated(k), rotated(ring - k)));
    }

    let mut pairs = Vec::with_capacity(players / 2);
    let mut sitting_out = None;
    for (a, b) in raw {
        if a == views {
            sitting_out = Some(b);
        } else if b == views {
            sitting_out = Some(a);
        } else {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    pairs.sort_unstable();
    let bye = sitting_out.map(|view| Bye {
        view,
        partner: {
            let (a, _) = pairs[r % pairs.len()];
            a
        },
    });
    Ok(PairRound { pairs, bye })
}
