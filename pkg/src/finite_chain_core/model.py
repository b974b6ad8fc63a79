"""
有限对称马尔可夫链模型
保存状态、对称化测度 m、跳跃速率 q 与杀死速率 k，并负责细致平衡校验与 JSON 载入
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

# 墓地状态 ∂ 的编码：扩展函数向量的最后一位
CEMETERY = -1

# 细致平衡的相对容差
BALANCE_RTOL = 1e-12


class ChainModelError(Exception):
    """链模型相关错误"""
    pass


class FunctionDomainError(ChainModelError):
    """状态函数定义域错误（例如 f(∂) ≠ 0）"""
    pass


class ChainModel:
    """有限对称马尔可夫链（带杀死）"""

    def __init__(self, m: Sequence[float], q: Any, k: Optional[Sequence[float]] = None,
                 states: Optional[Sequence[str]] = None, name: str = "chain",
                 strict: bool = True):
        """
        初始化链模型

        Args:
            m: 每个状态的对称化测度权重
            q: 跳跃速率矩阵 (n×n)，对角线为 0
            k: 每个状态的杀死速率，缺省为 0
            states: 状态名称，缺省为 "0".."n-1"
            name: 模型名称
            strict: 是否强制细致平衡（关闭仅用于构造负对照）
        """
        m_arr = np.array(m, dtype=float)
        q_arr = np.array(q, dtype=float)
        n = m_arr.shape[0] if m_arr.ndim == 1 else -1
        k_arr = np.zeros(n) if k is None else np.array(k, dtype=float)

        if m_arr.ndim != 1 or q_arr.shape != (n, n) or k_arr.shape != (n,):
            raise ChainModelError(
                f"形状不一致: m{m_arr.shape}, q{q_arr.shape}, k{k_arr.shape}"
            )

        self.name = name
        self.strict = strict
        self.states: Tuple[str, ...] = (
            tuple(str(s) for s in states) if states is not None
            else tuple(str(i) for i in range(n))
        )
        if len(self.states) != n:
            raise ChainModelError(f"状态数 {len(self.states)} 与 m 的长度 {n} 不一致")

        self.m = m_arr
        self.q = q_arr
        self.k = k_arr
        for arr in (self.m, self.q, self.k):
            arr.setflags(write=False)

        self._check_basic()
        violations = self.balance_violations()
        if violations:
            message = "细致平衡不成立: " + ", ".join(
                f"m({x})q({x},{y}) != m({y})q({y},{x})" for x, y in violations[:5]
            )
            if strict:
                raise ChainModelError(message)
            logger.warning(f"{self.name}: {message}（非严格模式，继续）")

    @property
    def n(self) -> int:
        """状态数"""
        return self.m.shape[0]

    @property
    def total_rates(self) -> np.ndarray:
        """离开各状态的总速率 Σ_y q(x,y) + k(x)"""
        return self.q.sum(axis=1) + self.k

    @property
    def is_symmetric(self) -> bool:
        return not self.balance_violations()

    def _check_basic(self):
        if np.any(self.m <= 0):
            bad = [self.states[i] for i in np.flatnonzero(self.m <= 0)]
            raise ChainModelError(f"m 必须为正，违规状态: {bad}")
        if np.any(self.q < 0) or np.any(self.k < 0):
            raise ChainModelError("速率 q、k 必须非负")
        if np.any(np.diag(self.q) != 0):
            raise ChainModelError("q 的对角线必须为 0")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.k))):
            raise ChainModelError("速率必须有限")

    def balance_violations(self, rtol: float = BALANCE_RTOL) -> List[Tuple[str, str]]:
        """
        列出违反细致平衡的状态对

        Args:
            rtol: 相对容差

        Returns:
            (x, y) 状态名称对列表，x < y
        """
        flux = self.m[:, None] * self.q
        diff = np.abs(flux - flux.T)
        scale = np.maximum(np.abs(flux), np.abs(flux.T))
        bad = np.argwhere(np.triu(diff > rtol * np.maximum(scale, np.finfo(float).tiny), 1))
        return [(self.states[x], self.states[y]) for x, y in bad]

    def extend(self, f: Any) -> np.ndarray:
        """
        把状态函数扩展到 E_∂（末位为 f(∂)）

        Args:
            f: 长度 n（补 f(∂)=0）或 n+1（末位必须为 0）的向量

        Returns:
            长度 n+1 的数组
        """
        arr = np.asarray(f, dtype=float)
        if arr.shape == (self.n,):
            return np.append(arr, 0.0)
        if arr.shape == (self.n + 1,):
            if arr[-1] != 0.0:
                raise FunctionDomainError(f"要求 f(∂)=0，实际 f(∂)={arr[-1]}")
            return arr
        raise FunctionDomainError(f"状态函数长度应为 {self.n}，实际形状 {arr.shape}")

    def to_dict(self) -> Dict[str, Any]:
        """导出为 JSON 方言（三元组形式的 q）"""
        triplets = [[int(x), int(y), float(self.q[x, y])]
                    for x, y in np.argwhere(self.q > 0)]
        return {
            "kind": "chain",
            "states": list(self.states),
            "m": self.m.tolist(),
            "q": triplets,
            "k": self.k.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any], name: str = "chain",
                  strict: bool = True) -> "ChainModel":
        """
        从 JSON 方言构建模型

        Args:
            doc: 含 states、m、q（[i, j, rate] 三元组）、k 的字典
            name: 模型名称
            strict: 是否强制细致平衡

        Returns:
            ChainModel
        """
        try:
            m = doc["m"]
            n = len(m)
            states = doc.get("states")
            index = {str(s): i for i, s in enumerate(states)} if states else {}
            q = np.zeros((n, n))
            for entry in doc.get("q", []):
                x, y, rate = entry
                x = index.get(str(x), x) if index else x
                y = index.get(str(y), y) if index else y
                q[int(x), int(y)] = float(rate)
            return cls(m, q, doc.get("k"), states=states, name=name, strict=strict)
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise ChainModelError(f"链模型文档无效: {e}") from e

    @classmethod
    def from_json(cls, path: Union[str, Path], strict: bool = True) -> "ChainModel":
        """从 JSON 文件载入"""
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls.from_dict(doc, name=Path(path).stem, strict=strict)

    def __repr__(self) -> str:
        return f"ChainModel(name={self.name!r}, n={self.n}, killing={bool(np.any(self.k > 0))})"


def reference_chain() -> ChainModel:
    """参考链 R3：m=(1,1,2)，q(0,1)=q(1,0)=q(1,2)=1，q(2,1)=0.5，k=(0,0.5,0)"""
    q = np.zeros((3, 3))
    q[0, 1] = q[1, 0] = q[1, 2] = 1.0
    q[2, 1] = 0.5
    return ChainModel([1.0, 1.0, 2.0], q, [0.0, 0.5, 0.0], name="R3")


def random_symmetric_chain(n: int, rng: np.random.Generator, killing: bool = True,
                           density: float = 0.7, name: Optional[str] = None) -> ChainModel:
    """
    生成随机对称链

    先取对称的通量矩阵 C(x,y)=C(y,x)，再令 q(x,y)=C(x,y)/m(x)，细致平衡自动成立

    Args:
        n: 状态数
        rng: 随机数生成器
        killing: 是否带杀死速率
        density: 非零通量的比例
        name: 模型名称

    Returns:
        ChainModel
    """
    m = rng.uniform(0.5, 2.0, size=n)
    upper = np.triu(rng.uniform(0.2, 1.5, size=(n, n)) * (rng.random((n, n)) < density), 1)
    # 保证连通：相邻状态之间总有通量
    for x in range(n - 1):
        if upper[x, x + 1] == 0.0:
            upper[x, x + 1] = rng.uniform(0.2, 1.5)
    flux = upper + upper.T
    q = flux / m[:, None]
    k = rng.uniform(0.0, 0.6, size=n) * (rng.random(n) < 0.5) if killing else np.zeros(n)
    return ChainModel(m, q, k, name=name or f"random{n}")


def broken_chain(model: ChainModel, offset: float = 1e-3) -> ChainModel:
    """
    在第一条正速率上施加相对扰动，得到不满足细致平衡的负对照链

    Args:
        model: 原始链
        offset: 相对扰动幅度

    Returns:
        strict=False 的 ChainModel
    """
    q = np.array(model.q)
    x, y = np.argwhere(q > 0)[0]
    q[x, y] *= 1.0 + offset
    return ChainModel(model.m, q, model.k, states=model.states,
                      name=f"{model.name}-broken", strict=False)
