"""The linear map from dual multipliers to the Hermitian matrix ``A_R + j A_I``.

Flow multipliers are weighted by the branch admittances so that, for any
Hermitian ``W``, ``Re tr(M W)`` reproduces
``sum_e lam_p_fwd p_fwd(W) + lam_q_fwd q_fwd(W) + ...`` with MATPOWER flows
``S_fwd = conj(y_ff) W_ii + conj(y_ft) W_ij`` and
``S_rev = conj(y_tt) W_jj + conj(y_tf) W_ji``, minus the shunt terms.
"""

from __future__ import annotations

import numpy as np

from .grid import Network


def assemble_ar_ai(
    net: Network,
    lam_p,
    lam_q,
    lam_p_fwd,
    lam_q_fwd,
    lam_p_rev,
    lam_q_rev,
    mu_w_lo=None,
    mu_w_hi=None,
) -> np.ndarray:
    """Return the Hermitian matrix ``A_R + j A_I``.

    ``A_R`` is real symmetric (bus diagonal terms and the ``E+`` branch terms),
    ``A_I`` real skew-symmetric (the ``E-`` branch terms). Omitted voltage
    multipliers are taken as zero.
    """
    n = net.n_bus
    f, t = net.from_idx, net.to_idx
    gff, bff = net.y_ff.real, net.y_ff.imag
    gft, bft = net.y_ft.real, net.y_ft.imag
    gtf, btf = net.y_tf.real, net.y_tf.imag
    gtt, btt = net.y_tt.real, net.y_tt.imag

    diag = -net.shunt_g * lam_p + net.shunt_b * lam_q
    if mu_w_lo is not None:
        diag = diag + mu_w_lo
    if mu_w_hi is not None:
        diag = diag - mu_w_hi
    diag = diag + np.bincount(f, lam_p_fwd * gff - lam_q_fwd * bff, minlength=n)
    diag = diag + np.bincount(t, lam_p_rev * gtt - lam_q_rev * btt, minlength=n)

    # coefficients of E+_ij (symmetric, half on each side) and E-_ij
    sym = lam_p_fwd * gft + lam_p_rev * gtf - lam_q_fwd * bft - lam_q_rev * btf
    skew = lam_p_fwd * bft - lam_p_rev * btf + lam_q_fwd * gft - lam_q_rev * gtf
    off = 0.5 * (sym + 1j * skew)

    M = np.zeros((n, n), dtype=complex)
    np.add.at(M, (f, t), off)
    np.add.at(M, (t, f), off.conj())
    M[np.diag_indices(n)] += diag
    return M


def assemble_adjoint(net: Network, G: np.ndarray) -> dict:
    """Adjoint of :func:`assemble_ar_ai` under ``<G, M> = Re sum(conj(G) * M)``.

    Returns the gradient of ``<G, M>`` with respect to every multiplier block,
    keyed like the arguments of :func:`assemble_ar_ai`.
    """
    f, t = net.from_idx, net.to_idx
    gdiag = np.real(np.diagonal(G))
    g_sym = 0.5 * (G[f, t].real + G[t, f].real)
    g_skew = 0.5 * (G[f, t].imag - G[t, f].imag)
    gff, bff = net.y_ff.real, net.y_ff.imag
    gft, bft = net.y_ft.real, net.y_ft.imag
    gtf, btf = net.y_tf.real, net.y_tf.imag
    gtt, btt = net.y_tt.real, net.y_tt.imag
    return {
        "lam_p": -net.shunt_g * gdiag,
        "lam_q": net.shunt_b * gdiag,
        "mu_w_lo": gdiag.copy(),
        "mu_w_hi": -gdiag,
        "lam_p_fwd": gff * gdiag[f] + gft * g_sym + bft * g_skew,
        "lam_q_fwd": -bff * gdiag[f] - bft * g_sym + gft * g_skew,
        "lam_p_rev": gtt * gdiag[t] + gtf * g_sym - btf * g_skew,
        "lam_q_rev": -btt * gdiag[t] - btf * g_sym - gtf * g_skew,
    }
