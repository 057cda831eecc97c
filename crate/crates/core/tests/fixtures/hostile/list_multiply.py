[Grasp('left')] * 1000
